//! Monte-Carlo benchmark: builtin convolution kernels and targets, forward
//! convolution, noise injection and replicated risk estimation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deconv::{deconvolve_with, risk_mse, EstimatorConfig};
use crate::error::{DeconvError, Result};
use crate::resolvent::{decompose, factorial, Polynomial, RationalLaplaceKernel, C64};
use crate::smoother::{regular_design, NoisySample};

pub const G_NAMES: [&str; 5] = ["g1", "g2", "g3", "g4", "g5"];
pub const F_NAMES: [&str; 3] = ["f1", "f2", "f3"];
pub const TABLE_SIZES: [usize; 2] = [100, 250];
pub const NOISE_STEPS: usize = 5;
pub const DEFAULT_INTERVAL: f64 = 10.0;
pub const DEFAULT_TRIM: f64 = 0.1;
/// Forward convolution lattice points per observation spacing.
pub const REFINEMENT: usize = 8;

pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

const G4_ROOTS: [(f64, f64); 4] = [(-4.0, 2.5), (-4.0, -2.5), (-0.75, 1.5), (-0.75, -1.5)];
const G5_EXTRA: [(f64, f64); 2] = [(-2.0, 2.0), (-2.0, -2.0)];

/// Optional overrides of the builtin kernel parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
}

/// Parameters of `g~(s) = sum_j rho_j / (s + a)^{r + j}`.
#[derive(Clone, Debug, PartialEq)]
pub struct FamilyParams {
    pub a: f64,
    pub r: usize,
    pub rho: Vec<f64>,
}

impl FamilyParams {
    /// `g(t) = e^{-at} sum_j rho_j t^{r+j-1} / (r+j-1)!`
    pub fn time_fn(&self) -> TimeFn {
        let p = self.clone();
        Arc::new(move |t: f64| {
            let s: f64 = p
                .rho
                .iter()
                .enumerate()
                .map(|(j, &c)| c * t.powi((p.r + j - 1) as i32) / factorial(p.r + j - 1))
                .sum();
            (-p.a * t).exp() * s
        })
    }
}

/// Noise level `sigma_0` of the ladder `sigma_0 / 2^i` for a builtin kernel.
pub fn sigma0(name: &str) -> Result<f64> {
    Ok(match name {
        "g1" => 0.001,
        "g2" => 0.1,
        "g3" => 0.01,
        "g4" | "g5" => 0.002,
        _ => return Err(DeconvError::UnknownBuiltin(name.into())),
    })
}

fn check_g(name: &str, params: &GParams) -> Result<()> {
    let allowed_b = matches!(name, "g1" | "g3");
    if !G_NAMES.contains(&name) {
        return Err(DeconvError::UnknownBuiltin(name.into()));
    }
    if params.b.is_some() && !allowed_b {
        return Err(DeconvError::InvalidKernel(format!("{name} takes no parameter b")));
    }
    Ok(())
}

/// Family representation of the builtins that belong to it (all but `g1`).
pub fn builtin_family(name: &str, params: &GParams) -> Result<Option<FamilyParams>> {
    check_g(name, params)?;
    Ok(match name {
        "g1" => None,
        "g2" => Some(FamilyParams { a: params.a.unwrap_or(5.0), r: 1, rho: vec![1.0] }),
        "g3" => Some(FamilyParams { a: params.a.unwrap_or(1.0), r: 1, rho: vec![1.0, params.b.unwrap_or(2.0)] }),
        _ => {
            let a = params.a.unwrap_or(1.0);
            let mut roots: Vec<C64> = G4_ROOTS.iter().map(|&(re, im)| C64::new(re, im)).collect();
            if name == "g5" {
                roots.extend(G5_EXTRA.iter().map(|&(re, im)| C64::new(re, im)));
            }
            let k = roots.len();
            // P(s) = sum_m c_m (s + a)^m, rho_j = c_{k-j}
            let taylor = Polynomial::from_roots(&roots).taylor(C64::new(-a, 0.0), k);
            let rho = (0..=k).map(|j| taylor[k - j].re).collect();
            Some(FamilyParams { a, r: 3, rho })
        }
    })
}

/// Rational Laplace representation of a builtin kernel.
pub fn builtin_g(name: &str, params: &GParams) -> Result<RationalLaplaceKernel> {
    if name == "g1" {
        check_g(name, params)?;
        let a = params.a.unwrap_or(5.0);
        let b = params.b.unwrap_or(2.0);
        let sa = Polynomial::from_real(&[a, 1.0]);
        let sa2 = sa.mul(&sa);
        let den = sa2.mul(&sa2.add(&Polynomial::from_real(&[b * b])));
        return RationalLaplaceKernel::new(Polynomial::from_real(&[b * b * b]), den, "g1");
    }
    let fam = builtin_family(name, params)?.expect("family builtin");
    let shift = C64::new(fam.a, 0.0);
    let k = fam.rho.len() - 1;
    let num = fam.rho.iter().enumerate().fold(Polynomial::zero(), |acc, (j, &c)| {
        acc.add(&Polynomial::shifted_power(shift, k - j).scale(C64::new(c, 0.0)))
    });
    let num = match name {
        // keep the factored form exact for the root-defined kernels
        "g4" | "g5" => {
            let mut roots: Vec<C64> = G4_ROOTS.iter().map(|&(re, im)| C64::new(re, im)).collect();
            if name == "g5" {
                roots.extend(G5_EXTRA.iter().map(|&(re, im)| C64::new(re, im)));
            }
            Polynomial::from_roots(&roots)
        }
        _ => num,
    };
    RationalLaplaceKernel::new(num, Polynomial::shifted_power(shift, k + fam.r), name)
}

/// Closed-form time-domain builtin kernel.
pub fn builtin_g_time(name: &str, params: &GParams) -> Result<TimeFn> {
    if name == "g1" {
        check_g(name, params)?;
        let a = params.a.unwrap_or(5.0);
        let b = params.b.unwrap_or(2.0);
        return Ok(Arc::new(move |t: f64| (-a * t).exp() * (b * t - (b * t).sin())));
    }
    Ok(builtin_family(name, params)?.expect("family builtin").time_fn())
}

/// Time-domain form of an arbitrary rational kernel via its partial fractions.
pub fn rational_time_fn(g: &RationalLaplaceKernel) -> TimeFn {
    let e = g.impulse_response();
    Arc::new(move |t: f64| e.eval(t, 0))
}

/// Regularized lower incomplete gamma `P(shape, x)`, zero for `x <= 0`.
pub fn gamma_cdf(shape: f64, scale: f64, t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        statrs::function::gamma::gamma_lr(shape, t / scale)
    }
}

/// Builtin deconvolution targets.
pub fn builtin_f(name: &str) -> Result<TimeFn> {
    Ok(match name {
        "f1" => Arc::new(|t: f64| t * t * (-t).exp()),
        "f2" => Arc::new(|t: f64| 1.0 - gamma_cdf(2.0, 2.0, t)),
        "f3" => Arc::new(|t: f64| 1.0 - gamma_cdf(3.0, 0.75, t)),
        _ => return Err(DeconvError::UnknownBuiltin(name.into())),
    })
}

/// `q(t_i) = int_0^{t_i} g(t_i - x) f(x) dx` by the trapezoid rule on a
/// lattice refining each observation spacing `REFINEMENT` times.
pub fn forward_convolve(g: &dyn Fn(f64) -> f64, f: &dyn Fn(f64) -> f64, times: &[f64]) -> Vec<f64> {
    if times.is_empty() {
        return Vec::new();
    }
    let step = times[0];
    let uniform = step > 0.0
        && times
            .iter()
            .enumerate()
            .all(|(i, &t)| (t - (i + 1) as f64 * step).abs() <= 1e-9 * t.abs().max(1.0));
    if uniform {
        let h = step / REFINEMENT as f64;
        let total = REFINEMENT * times.len();
        let gs: Vec<f64> = (0..=total).map(|k| g(k as f64 * h)).collect();
        let fs: Vec<f64> = (0..=total).map(|k| f(k as f64 * h)).collect();
        return (1..=times.len())
            .map(|i| {
                let kk = REFINEMENT * i;
                let mut s = 0.5 * (gs[kk] * fs[0] + gs[0] * fs[kk]);
                for m in 1..kk {
                    s += gs[kk - m] * fs[m];
                }
                h * s
            })
            .collect();
    }
    let mut lattice = vec![0.0];
    let mut prev = 0.0;
    for &t in times {
        for k in 1..=REFINEMENT {
            lattice.push(prev + (t - prev) * k as f64 / REFINEMENT as f64);
        }
        prev = t;
    }
    times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let pts = &lattice[..=REFINEMENT * (i + 1)];
            pts.windows(2)
                .map(|w| 0.5 * (w[1] - w[0]) * (g(t - w[0]) * f(w[0]) + g(t - w[1]) * f(w[1])))
                .sum()
        })
        .collect()
}

/// One Monte-Carlo cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub g: String,
    #[serde(default)]
    pub g_params: GParams,
    pub f: String,
    pub n: usize,
    pub interval: f64,
    pub sigma: f64,
    /// Position on the noise ladder `sigma_0 / 2^i`, when taken from it.
    pub noise_index: Option<usize>,
    pub runs: usize,
    pub seed: u64,
    pub trim: f64,
    pub estimator: EstimatorConfig,
}

impl Scenario {
    /// Benchmark cell `(g, f, n, i)` with `sigma = sigma_0(g) / 2^i`.
    pub fn cell(g: &str, f: &str, n: usize, i: usize, runs: usize, seed: u64) -> Result<Self> {
        let sigma = sigma0(g)? / 2f64.powi(i as i32);
        builtin_f(f)?;
        Ok(Scenario {
            g: g.into(),
            g_params: GParams::default(),
            f: f.into(),
            n,
            interval: DEFAULT_INTERVAL,
            sigma,
            noise_index: Some(i),
            runs,
            seed,
            trim: DEFAULT_TRIM,
            estimator: EstimatorConfig::default(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(DeconvError::InvalidParameter(format!("n must be at least 10, got {}", self.n)));
        }
        if self.runs < 1 {
            return Err(DeconvError::InvalidParameter("runs must be at least 1".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(DeconvError::InvalidParameter(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.interval > 0.0 && self.interval.is_finite()) {
            return Err(DeconvError::InvalidParameter("interval length must be positive".into()));
        }
        if !(0.0..0.5).contains(&self.trim) {
            return Err(DeconvError::InvalidParameter(format!("trim must lie in [0, 0.5), got {}", self.trim)));
        }
        Ok(())
    }
}

/// Every cell of the benchmark table: 5 kernels x 3 targets x 2 sizes x 5 noise levels.
pub fn table_grid(runs: usize, seed: u64, estimator: &EstimatorConfig) -> Vec<Scenario> {
    let mut out = Vec::new();
    for g in G_NAMES {
        for f in F_NAMES {
            for n in TABLE_SIZES {
                for i in 0..NOISE_STEPS {
                    let mut sc = Scenario::cell(g, f, n, i, runs, seed).expect("builtin names");
                    sc.estimator = estimator.clone();
                    out.push(sc);
                }
            }
        }
    }
    out
}

/// Noise-free signal of a scenario on its design.
struct Prepared {
    times: Vec<f64>,
    q: Vec<f64>,
    truth: TimeFn,
}

fn prepare(sc: &Scenario) -> Result<Prepared> {
    sc.validate()?;
    let g_time = builtin_g_time(&sc.g, &sc.g_params)?;
    let truth = builtin_f(&sc.f)?;
    let times = regular_design(sc.n, sc.interval);
    let q = forward_convolve(&*g_time, &*truth, &times);
    Ok(Prepared { times, q, truth })
}

/// Normal noise for replication `run`: stream `run` of a ChaCha8 generator
/// seeded with `seed`.
pub fn noise(seed: u64, run: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Observation times and noisy values for one replication.
pub fn simulate_data(sc: &Scenario, run: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let p = prepare(sc)?;
    let eps = noise(sc.seed, run, sc.n);
    let y = p.q.iter().zip(&eps).map(|(q, e)| q + sc.sigma * e).collect();
    Ok((p.times, y))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunFailure {
    pub run: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BandwidthCount {
    pub bandwidth: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BandwidthHistogram {
    pub j: usize,
    pub counts: Vec<BandwidthCount>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub scenario: Scenario,
    /// Mean trimmed MSE over successful runs; `None` when every run failed.
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub runs: usize,
    pub failures: usize,
    pub failure_rate: f64,
    /// Per-run MSE, `None` for failed runs.
    pub mse: Vec<Option<f64>>,
    pub failure_messages: Vec<RunFailure>,
    pub bandwidths: Vec<BandwidthHistogram>,
}

/// Sum by recursive halving so the result does not depend on chunking.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Mean and sample standard deviation (`n - 1` denominator; 0 for one value).
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    if xs.len() == 1 {
        return Some((mean, 0.0));
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    Some((mean, (pairwise_sum(&dev) / (n - 1.0)).sqrt()))
}

pub fn run_experiment(sc: &Scenario) -> Result<ExperimentReport> {
    let p = prepare(sc)?;
    let g = builtin_g(&sc.g, &sc.g_params)?;
    let dec = decompose(&g)?;

    let outcomes: Vec<std::result::Result<(f64, Vec<f64>), String>> = (0..sc.runs)
        .into_par_iter()
        .map(|run| {
            let eps = noise(sc.seed, run as u64, sc.n);
            let y: Vec<f64> = p.q.iter().zip(&eps).map(|(q, e)| q + sc.sigma * e).collect();
            NoisySample::new(p.times.clone(), y, sc.interval, sc.sigma)
                .and_then(|data| deconvolve_with(&data, &dec, &sc.estimator))
                .map(|res| (risk_mse(&res, &*p.truth, sc.trim), res.bandwidths))
                .map_err(|e| e.to_string())
        })
        .collect();

    let mut mse = Vec::with_capacity(sc.runs);
    let mut failure_messages = Vec::new();
    let mut hist: Vec<BTreeMap<u64, (f64, usize)>> = vec![BTreeMap::new(); dec.r + 1];
    for (run, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok((m, bws)) => {
                mse.push(Some(m));
                for (j, bw) in bws.into_iter().enumerate() {
                    // larger bandwidth first
                    hist[j].entry(u64::MAX - bw.to_bits()).or_insert((bw, 0)).1 += 1;
                }
            }
            Err(message) => {
                mse.push(None);
                failure_messages.push(RunFailure { run, message });
            }
        }
    }
    let ok: Vec<f64> = mse.iter().flatten().copied().collect();
    let stats = mean_std(&ok);
    let failures = failure_messages.len();
    Ok(ExperimentReport {
        scenario: sc.clone(),
        mean: stats.map(|s| s.0),
        std: stats.map(|s| s.1),
        runs: sc.runs,
        failures,
        failure_rate: failures as f64 / sc.runs as f64,
        mse,
        failure_messages,
        bandwidths: hist
            .into_iter()
            .enumerate()
            .map(|(j, h)| BandwidthHistogram {
                j,
                counts: h.into_values().map(|(bandwidth, count)| BandwidthCount { bandwidth, count }).collect(),
            })
            .collect(),
    })
}

pub const CSV_HEADER: &str = "g,f,n,i,sigma,mean,std,runs,failures";

/// 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_else(|| "nan".into())
}

/// One CSV row per report.
pub fn reports_to_csv(reports: &[ExperimentReport]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in reports {
        let sc = &r.scenario;
        let i = sc.noise_index.map(|i| i.to_string()).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            sc.g,
            sc.f,
            sc.n,
            i,
            fmt_float(sc.sigma),
            fmt_opt(r.mean),
            fmt_opt(r.std),
            r.runs,
            r.failures
        );
    }
    s
}
