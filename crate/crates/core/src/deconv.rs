//! The adaptive deconvolution estimator
//! `f = B_r^{-1} (q^{(r)} - sum_j b_j q^{(r-1-j)} - int_0^t q(t - x) phi_1^{(r)}(x) dx)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DeconvError, Result};
use crate::kernels::{KernelFamily, ESTIMATOR_SMOOTHNESS};
use crate::quad::gauss_legendre;
use crate::resolvent::{decompose, RationalLaplaceKernel, ResolventDecomposition};
use crate::smoother::{lepski_select_detailed, pc_estimate, uniform_grid, LepskiConfig, NoisySample};

/// How the bandwidth for each derivative order is chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum BandwidthRule {
    Lepski(LepskiConfig),
    /// One bandwidth per derivative order `j = 0..=r`.
    Fixed { bandwidths: Vec<f64> },
}

/// Quadrature for `int_0^t q(t - x) phi_1^{(r)}(x) dx` on the evaluation grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvolutionRule {
    /// Plain trapezoid on grid values of both factors.
    Trapezoid,
    /// `q` interpolated linearly between grid points, `phi_1^{(r)}` integrated
    /// exactly against each hat function (Gauss–Legendre per panel).
    ProductTrapezoid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Kernel order `L`; must exceed `r`.
    pub order: usize,
    /// Endpoint zero multiplicity of the smoothing kernels.
    #[serde(default = "default_smoothness")]
    pub smoothness: usize,
    pub bandwidth: BandwidthRule,
    /// Number of equispaced evaluation points on `[0, T]`.
    pub grid_size: usize,
    pub convolution: ConvolutionRule,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            order: 8,
            smoothness: ESTIMATOR_SMOOTHNESS,
            bandwidth: BandwidthRule::Lepski(LepskiConfig::default()),
            grid_size: 1024,
            convolution: ConvolutionRule::ProductTrapezoid,
        }
    }
}

fn default_smoothness() -> usize {
    ESTIMATOR_SMOOTHNESS
}

impl EstimatorConfig {
    pub fn kernel(&self) -> KernelFamily {
        KernelFamily::new(self.order, self.smoothness)
    }

    pub fn fixed(order: usize, bandwidths: Vec<f64>) -> Self {
        EstimatorConfig { order, bandwidth: BandwidthRule::Fixed { bandwidths }, ..Default::default() }
    }
}

/// The three pieces of the estimator, before division by `B_r`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimatorTerms {
    /// `q^{(r)}`
    pub derivative: Vec<f64>,
    /// `sum_j b_j q^{(r-1-j)}`
    pub lower_order: Vec<f64>,
    /// `int_0^t q(t - x) phi_1^{(r)}(x) dx`
    pub integral: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DeconvolutionResult {
    pub grid: Vec<f64>,
    pub f_hat: Vec<f64>,
    /// Bandwidth used for `q^{(j)}`, `j = 0..=r`.
    pub bandwidths: Vec<f64>,
    /// Lepski grid level of each bandwidth, when selected adaptively.
    pub levels: Option<Vec<usize>>,
    /// Estimates of `q^{(j)}` on the grid, `j = 0..=r`.
    pub derivatives: Vec<Vec<f64>>,
    pub terms: EstimatorTerms,
    pub r: usize,
    pub b_r: f64,
    pub config: EstimatorConfig,
}

/// Decompose `g` and run the estimator.
pub fn deconvolve(data: &NoisySample, g: &RationalLaplaceKernel, cfg: &EstimatorConfig) -> Result<DeconvolutionResult> {
    let dec = decompose(g)?;
    deconvolve_with(data, &dec, cfg)
}

/// Run the estimator against an already computed decomposition.
pub fn deconvolve_with(
    data: &NoisySample,
    dec: &ResolventDecomposition,
    cfg: &EstimatorConfig,
) -> Result<DeconvolutionResult> {
    let r = dec.r;
    if cfg.order <= r {
        return Err(DeconvError::KernelOrderTooLow { l: cfg.order, r });
    }
    if cfg.grid_size < 2 {
        return Err(DeconvError::InvalidParameter("evaluation grid needs at least 2 points".into()));
    }
    if let BandwidthRule::Fixed { bandwidths } = &cfg.bandwidth {
        if bandwidths.len() != r + 1 {
            return Err(DeconvError::InvalidParameter(format!(
                "need {} fixed bandwidths (one per derivative order 0..={r}), got {}",
                r + 1,
                bandwidths.len()
            )));
        }
    }
    let grid = uniform_grid(data.interval(), cfg.grid_size);

    let per_order: Vec<(f64, Option<usize>, Vec<f64>)> = (0..=r)
        .into_par_iter()
        .map(|j| {
            let (lambda, level) = match &cfg.bandwidth {
                BandwidthRule::Lepski(lc) => {
                    let out = lepski_select_detailed(data, j, cfg.kernel(), lc)?;
                    (out.bandwidth, Some(out.level))
                }
                BandwidthRule::Fixed { bandwidths } => (bandwidths[j], None),
            };
            let est = pc_estimate(data, j, cfg.kernel(), lambda, &grid)?;
            Ok((lambda, level, est.values))
        })
        .collect::<Result<_>>()?;

    let bandwidths: Vec<f64> = per_order.iter().map(|p| p.0).collect();
    let levels: Option<Vec<usize>> = per_order.iter().map(|p| p.1).collect();
    let derivatives: Vec<Vec<f64>> = per_order.into_iter().map(|p| p.2).collect();

    let g_len = grid.len();
    let derivative = derivatives[r].clone();
    let mut lower_order = vec![0.0; g_len];
    for (j, &bj) in dec.b.iter().enumerate() {
        let q = &derivatives[r - 1 - j];
        for (acc, &v) in lower_order.iter_mut().zip(q) {
            *acc += bj * v;
        }
    }
    let integral = if dec.phi1_is_zero() {
        vec![0.0; g_len]
    } else {
        let h = grid[1] - grid[0];
        match cfg.convolution {
            ConvolutionRule::Trapezoid => {
                let kernel: Vec<f64> = grid.iter().map(|&x| dec.phi1_eval(x, r)).collect();
                causal_trapezoid(&derivatives[0], &kernel, h)
            }
            ConvolutionRule::ProductTrapezoid => {
                let (left, right) = hat_weights(|x| dec.phi1_eval(x, r), h, g_len - 1);
                causal_product_trapezoid(&derivatives[0], &left, &right)
            }
        }
    };
    let f_hat = (0..g_len)
        .map(|k| (derivative[k] - lower_order[k] - integral[k]) / dec.b_r)
        .collect();

    Ok(DeconvolutionResult {
        grid,
        f_hat,
        bandwidths,
        levels,
        derivatives,
        terms: EstimatorTerms { derivative, lower_order, integral },
        r,
        b_r: dec.b_r,
        config: cfg.clone(),
    })
}

/// `c_k = h * [ sum_{m=0}^{k} a_{k-m} b_m ]` with halved end weights.
pub fn causal_trapezoid(a: &[f64], b: &[f64], h: f64) -> Vec<f64> {
    (0..a.len())
        .map(|k| {
            if k == 0 {
                return 0.0;
            }
            let mut s = 0.5 * (a[k] * b[0] + a[0] * b[k]);
            for m in 1..k {
                s += a[k - m] * b[m];
            }
            h * s
        })
        .collect()
}

const PANEL_NODES: usize = 8;

/// `left[m] = int phi(x) (1 - theta) dx`, `right[m] = int phi(x) theta dx`
/// over the panel `[m h, (m + 1) h]`, `theta = x / h - m`.
pub fn hat_weights(phi: impl Fn(f64) -> f64, h: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let (nodes, weights) = gauss_legendre(PANEL_NODES);
    let mut left = Vec::with_capacity(panels);
    let mut right = Vec::with_capacity(panels);
    for m in 0..panels {
        let (mut l, mut r) = (0.0, 0.0);
        for (&u, &w) in nodes.iter().zip(&weights) {
            let theta = 0.5 * (u + 1.0);
            let v = 0.5 * w * h * phi((m as f64 + theta) * h);
            l += v * (1.0 - theta);
            r += v * theta;
        }
        left.push(l);
        right.push(r);
    }
    (left, right)
}

/// `c_k = sum_{m<k} a_{k-m} left_m + a_{k-m-1} right_m`: the convolution of
/// the piecewise-linear interpolant of `a` with the kernel behind the weights.
pub fn causal_product_trapezoid(a: &[f64], left: &[f64], right: &[f64]) -> Vec<f64> {
    (0..a.len())
        .map(|k| (0..k).map(|m| a[k - m] * left[m] + a[k - m - 1] * right[m]).sum())
        .collect()
}

/// Mean squared error over the grid points in `[trim T, (1 - trim) T]`.
pub fn risk_mse(result: &DeconvolutionResult, truth: impl Fn(f64) -> f64, trim: f64) -> f64 {
    trimmed_mse(&result.grid, &result.f_hat, truth, trim)
}

pub fn trimmed_mse(grid: &[f64], values: &[f64], truth: impl Fn(f64) -> f64, trim: f64) -> f64 {
    let (lo, hi) = trim_bounds(grid, trim);
    let mut sum = 0.0;
    let mut count = 0usize;
    for (&t, &v) in grid.iter().zip(values) {
        if t >= lo && t <= hi {
            sum += (v - truth(t)).powi(2);
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

fn trim_bounds(grid: &[f64], trim: f64) -> (f64, f64) {
    let start = grid.first().copied().unwrap_or(0.0);
    let end = grid.last().copied().unwrap_or(0.0);
    let width = end - start;
    let eps = 1e-12 * width.abs().max(1.0);
    (start + trim * width - eps, end - trim * width + eps)
}

/// Relative `L2` error `||f_hat - f|| / ||f||` over the trimmed grid.
pub fn relative_l2_error(grid: &[f64], values: &[f64], truth: impl Fn(f64) -> f64, trim: f64) -> f64 {
    let (lo, hi) = trim_bounds(grid, trim);
    let (mut num, mut den) = (0.0, 0.0);
    for (&t, &v) in grid.iter().zip(values) {
        if t >= lo && t <= hi {
            let f = truth(t);
            num += (v - f).powi(2);
            den += f * f;
        }
    }
    (num / den).sqrt()
}
