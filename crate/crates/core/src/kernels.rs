//! Moment-constrained polynomial smoothing kernels of order `(L, j)`.
//!
//! A kernel of order `(L, j)` on its support satisfies
//! `int t^l K(t) dt = 0` for `l < L, l != j` and `(-1)^j j!` for `l = j`, so
//! `lambda^{-(j+1)} sum K((t - t_i)/lambda) dt_i y_i` estimates the `j`-th
//! derivative. Kernels here also vanish to order `s` at both support
//! endpoints: `K(t) = (t + 1)^s (rho - t)^s p(t)` with `deg p = L - 1`.
//! [`make_kernel`] uses `s = 2`; the estimators default to
//! [`ESTIMATOR_SMOOTHNESS`], whose zero extension is `C^3`.
//!
//! In the local variable `x` of the support, `p` is expanded in Gegenbauer
//! polynomials `C_k` of index `s + 1/2`, which are orthogonal for the weight
//! `(1 - x^2)^s`. The moment conditions then decouple and each coefficient
//! has a closed form, so no linear system is solved.

use std::collections::HashMap;
use std::sync::Arc;

use once_cell::sync::Lazy;
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::error::{DeconvError, Result};
use crate::quad::gauss_legendre;

/// Polynomial kernel on `[lo, hi]`. With `x = (t - center) / half_width`,
/// `K = (1 - x^2)^s sum_k g_k C_k(x)`.
///
/// Boundary kernels of high order have monomial coefficients several orders
/// of magnitude above their values, even in `x`; the orthogonal expansion
/// keeps the coefficients at the size of the kernel itself.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmoothingKernel {
    order: usize,
    deriv: usize,
    smoothness: usize,
    lo: f64,
    hi: f64,
    center: f64,
    half_width: f64,
    /// `g_k`
    gegen: Vec<f64>,
    /// Recurrence factors of `C_{k+1} = a_k x C_k - b_k C_{k-1}`.
    #[serde(skip)]
    rec: Vec<(f64, f64)>,
}

impl SmoothingKernel {
    /// `L`
    pub fn order(&self) -> usize {
        self.order
    }

    /// `j`
    pub fn deriv(&self) -> usize {
        self.deriv
    }

    /// `s`
    pub fn smoothness(&self) -> usize {
        self.smoothness
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Midpoint of the support.
    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Gegenbauer index `s + 1/2`.
    pub fn gegenbauer_index(&self) -> f64 {
        self.smoothness as f64 + 0.5
    }

    /// Coefficients `g_k` of `p` in the Gegenbauer basis.
    pub fn gegenbauer_coeffs(&self) -> &[f64] {
        &self.gegen
    }

    /// Ascending monomial coefficients of `K` in `x`.
    pub fn local_coeffs(&self) -> Vec<f64> {
        let lambda = self.gegenbauer_index();
        let mut p = vec![0.0; self.gegen.len()];
        let (mut prev, mut cur) = (Vec::new(), vec![1.0]);
        for (k, &g) in self.gegen.iter().enumerate() {
            for (i, &c) in cur.iter().enumerate() {
                p[i] += g * c;
            }
            let kf = k as f64;
            let mut next = vec![0.0; cur.len() + 1];
            for (i, &c) in cur.iter().enumerate() {
                next[i + 1] += 2.0 * (kf + lambda) * c / (kf + 1.0);
            }
            for (i, &c) in prev.iter().enumerate() {
                next[i] -= (kf + 2.0 * lambda - 1.0) * c / (kf + 1.0);
            }
            prev = std::mem::replace(&mut cur, next);
        }
        let mut out = p;
        for _ in 0..self.smoothness {
            out = poly_mul(&out, &[1.0, 0.0, -1.0]);
        }
        out
    }

    /// Ascending monomial coefficients of `K` in `t`. Badly conditioned for
    /// narrow boundary supports; for display only.
    pub fn monomial_coeffs(&self) -> Vec<f64> {
        let inv = 1.0 / self.half_width;
        let step = [-self.center * inv, inv];
        let local = self.local_coeffs();
        let mut out = vec![0.0; local.len()];
        let mut basis = vec![1.0];
        for &c in &local {
            for (i, &b) in basis.iter().enumerate() {
                out[i] += c * b;
            }
            basis = poly_mul(&basis, &step);
        }
        out
    }

    pub fn degree(&self) -> usize {
        self.gegen.len() - 1 + 2 * self.smoothness
    }

    #[inline]
    fn local(&self, t: f64) -> f64 {
        (t - self.center) / self.half_width
    }

    #[inline]
    fn eval_local(&self, x: f64) -> f64 {
        let b = (1.0 - x) * (1.0 + x);
        let (mut prev, mut cur, mut acc) = (0.0, 1.0, 0.0);
        for (&g, &(a, bk)) in self.gegen.iter().zip(&self.rec) {
            acc += g * cur;
            let next = a * x * cur - bk * prev;
            prev = cur;
            cur = next;
        }
        b.powi(self.smoothness as i32) * acc
    }

    /// Polynomial value inside the support, exactly zero outside.
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        if t < self.lo || t > self.hi {
            return 0.0;
        }
        self.eval_local(self.local(t))
    }

    /// Derivative of the polynomial piece (zero outside the support).
    pub fn eval_derivative(&self, t: f64) -> f64 {
        if t < self.lo || t > self.hi {
            return 0.0;
        }
        let x = self.local(t);
        let lambda = self.gegenbauer_index();
        let s = self.smoothness as i32;
        let b = (1.0 - x) * (1.0 + x);
        let p = gegenbauer_sum(lambda, &self.gegen, x);
        // C_k' = 2 lambda C_{k-1} of index lambda + 1
        let dp = if self.gegen.len() > 1 {
            2.0 * lambda * gegenbauer_sum(lambda + 1.0, &self.gegen[1..], x)
        } else {
            0.0
        };
        b.powi(s - 1) * (b * dp - 2.0 * s as f64 * x * p) / self.half_width
    }

    /// `int_lo^hi t^l K(t) dt`, by Gauss-Legendre with enough nodes to be
    /// exact for the polynomial integrand.
    pub fn moment(&self, l: usize) -> f64 {
        let (xs, ws) = gauss_legendre((self.degree() + l) / 2 + 1);
        let (c, w) = (self.center, self.half_width);
        w * xs.iter().zip(&ws).map(|(&x, &q)| q * (c + w * x).powi(l as i32) * self.eval_local(x)).sum::<f64>()
    }

    /// `int K^2`
    pub fn l2_norm_sq(&self) -> f64 {
        let (xs, ws) = gauss_legendre(self.degree() + 1);
        self.half_width * xs.iter().zip(&ws).map(|(&x, &q)| q * self.eval_local(x).powi(2)).sum::<f64>()
    }

    /// Mirror image `(-1)^j K(-t)` on `[-hi, -lo]`; a kernel on `[-1, rho]`
    /// becomes the matching kernel for the opposite edge on `[-rho, 1]`.
    pub fn reflected(&self) -> SmoothingKernel {
        // C_k(-x) = (-1)^k C_k(x)
        let flip = |k: usize| if (k + self.deriv) % 2 == 0 { 1.0 } else { -1.0 };
        SmoothingKernel {
            lo: -self.hi,
            hi: -self.lo,
            center: -self.center,
            gegen: self.gegen.iter().enumerate().map(|(k, &g)| flip(k) * g).collect(),
            ..self.clone()
        }
    }
}

/// `sum_k coeffs[k] C_k(x)` for Gegenbauer polynomials of index `lambda`,
/// by forward recurrence.
fn gegenbauer_sum(lambda: f64, coeffs: &[f64], x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    let mut acc = 0.0;
    for (k, &g) in coeffs.iter().enumerate() {
        acc += g * cur;
        let kf = k as f64;
        let next = (2.0 * x * (kf + lambda) * cur - (kf + 2.0 * lambda - 1.0) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    acc
}

fn recurrence(lambda: f64, n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|k| {
            let kf = k as f64;
            (2.0 * (kf + lambda) / (kf + 1.0), (kf + 2.0 * lambda - 1.0) / (kf + 1.0))
        })
        .collect()
}

/// `C_0(x), ..., C_{n-1}(x)` of index `lambda`.
fn gegenbauer_values(lambda: f64, n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..n {
        out.push(cur);
        let kf = k as f64;
        let next = (2.0 * x * (kf + lambda) * cur - (kf + 2.0 * lambda - 1.0) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    out
}

/// `h_k = int (1 - x^2)^s C_k(x)^2 dx` for `k < n`, index `s + 1/2`.
fn gegenbauer_norms(s: usize, n: usize) -> Vec<f64> {
    let lambda = s as f64 + 0.5;
    // h_0 = int (1 - x^2)^s = 2^{2s+1} (s!)^2 / (2s + 1)!
    let h0 = (1..=s).fold(2.0, |h, m| h * (2 * m) as f64 / (2 * m + 1) as f64);
    let mut out = vec![h0];
    for k in 1..n {
        let kf = k as f64;
        let ratio = (kf + 2.0 * lambda - 1.0) * (kf - 1.0 + lambda) / (kf * (kf + lambda));
        out.push(out[k - 1] * ratio);
    }
    out
}

fn check_order(l: usize, j: usize) -> Result<()> {
    if l < 2 || j >= l {
        return Err(DeconvError::InvalidKernelOrder { l, j });
    }
    Ok(())
}

/// Endpoint zero multiplicity of [`make_kernel`] and [`make_boundary_kernel`].
pub const BASE_SMOOTHNESS: usize = 2;

/// Endpoint zero multiplicity used by the derivative estimators.
///
/// With `s = 2` the Priestley-Chao sum has a Riemann error of order
/// `(dt / lambda)^3`, which swamps third-derivative estimates at `n = 100`.
pub const ESTIMATOR_SMOOTHNESS: usize = 4;

/// Interior kernel of order `(L, j)` on `[-1, 1]`.
pub fn make_kernel(l: usize, j: usize) -> Result<SmoothingKernel> {
    make_boundary_kernel(l, j, 1.0)
}

/// Kernel of order `(L, j)` on the asymmetric support `[-1, rho]`.
pub fn make_boundary_kernel(l: usize, j: usize, rho: f64) -> Result<SmoothingKernel> {
    make_smooth_kernel(l, j, rho, BASE_SMOOTHNESS)
}

/// Kernel of order `(L, j)` on `[-1, rho]` vanishing to order `s >= 2` at
/// both ends, i.e. `K(t) = (t + 1)^s (rho - t)^s p(t)`.
pub fn make_smooth_kernel(l: usize, j: usize, rho: f64, s: usize) -> Result<SmoothingKernel> {
    check_order(l, j)?;
    if !(2..=12).contains(&s) {
        return Err(DeconvError::InvalidParameter(format!(
            "kernel smoothness must lie in 2..=12, got {s}"
        )));
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(DeconvError::InvalidRho(rho));
    }
    // t = c + w x with x in [-1, 1]; t = 0 sits at x0
    let c = (rho - 1.0) / 2.0;
    let w = (rho + 1.0) / 2.0;
    let x0 = (1.0 - rho) / (1.0 + rho);
    let lambda = s as f64 + 0.5;

    // Testing the moment conditions against q(t) = C_k((t - c) / w) gives
    // w^{2s+1} d_k h_k = (-1)^j q^{(j)}(0) with K = w^{2s} (1 - x^2)^s sum d_k C_k,
    // and C_k^{(j)} = 2^j (lambda)_j C_{k-j} of index lambda + j.
    let rising: f64 = (0..j).map(|i| 2.0 * (lambda + i as f64)).product();
    let shifted = gegenbauer_values(lambda + j as f64, l - j, x0);
    let norms = gegenbauer_norms(s, l);
    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
    let scale = sign * rising / w.powi(j as i32 + 1);
    let mut gegen: Vec<f64> =
        (0..l).map(|k| if k < j { 0.0 } else { scale * shifted[k - j] / norms[k] }).collect();
    if gegen.iter().any(|v| !v.is_finite()) {
        return Err(DeconvError::SingularMomentSystem { l, j, rho });
    }
    // interior kernels have parity (-1)^j, which leaves exact zeros on top
    while gegen.len() > 1 && gegen.last() == Some(&0.0) {
        gegen.pop();
    }
    let rec = recurrence(lambda, gegen.len());
    Ok(SmoothingKernel { order: l, deriv: j, smoothness: s, lo: -1.0, hi: rho, center: c, half_width: w, gegen, rec })
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (k, y) in b.iter().enumerate() {
            out[i + k] += x * y;
        }
    }
    out
}

/// Which edge of the data a kernel is fitted to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Edge {
    /// Support `[-1, rho]`: the estimation point is near the left end of the data.
    Left,
    /// Support `[-rho, 1]`: near the right end.
    Right,
}

/// Kernel order together with the endpoint zero multiplicity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KernelFamily {
    pub order: usize,
    pub smoothness: usize,
}

impl KernelFamily {
    pub fn new(order: usize, smoothness: usize) -> Self {
        Self { order, smoothness }
    }

    /// Order `L` with [`ESTIMATOR_SMOOTHNESS`].
    pub fn with_order(order: usize) -> Self {
        Self::new(order, ESTIMATOR_SMOOTHNESS)
    }
}

type CacheKey = (KernelFamily, usize, i64, Edge);

static CACHE: Lazy<RwLock<HashMap<CacheKey, Arc<SmoothingKernel>>>> =
    Lazy::new(|| RwLock::new(HashMap::new()));

/// Resolution of the kernel cache in `rho`.
pub const RHO_RESOLUTION: f64 = 1e-6;

/// Memoized kernel lookup. `rho` is rounded to [`RHO_RESOLUTION`] and clamped
/// into `[RHO_RESOLUTION, 1]`, so `rho = 0` yields the one-sided kernel.
pub fn cached_kernel(fam: KernelFamily, j: usize, rho: f64, edge: Edge) -> Result<Arc<SmoothingKernel>> {
    let max_key = (1.0 / RHO_RESOLUTION).round() as i64;
    let rkey = ((rho / RHO_RESOLUTION).round() as i64).clamp(1, max_key);
    let edge = if rkey == max_key { Edge::Left } else { edge };
    let key = (fam, j, rkey, edge);
    if let Some(k) = CACHE.read().get(&key) {
        return Ok(Arc::clone(k));
    }
    let rho_r = rkey as f64 / max_key as f64;
    let base = make_smooth_kernel(fam.order, j, rho_r, fam.smoothness)?;
    let k = Arc::new(match edge {
        Edge::Left => base,
        Edge::Right => base.reflected(),
    });
    CACHE.write().entry(key).or_insert_with(|| Arc::clone(&k));
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).fold(1.0, |a, k| a * k as f64)
    }

    fn max_abs(k: &SmoothingKernel) -> f64 {
        let (lo, hi) = k.support();
        (0..=2000).map(|i| k.eval(lo + (hi - lo) * i as f64 / 2000.0).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn biweight_and_its_derivative_kernel() {
        let k0 = make_kernel(2, 0).unwrap();
        assert_eq!(k0.degree(), 4);
        let want0 = [15.0 / 16.0, 0.0, -15.0 / 8.0, 0.0, 15.0 / 16.0];
        for (a, b) in k0.local_coeffs().iter().zip(want0) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((k0.eval(0.0) - 15.0 / 16.0).abs() < 1e-14);

        let k1 = make_kernel(2, 1).unwrap();
        assert_eq!(k1.degree(), 5);
        let want1 = [0.0, -105.0 / 16.0, 0.0, 105.0 / 8.0, 0.0, -105.0 / 16.0];
        for (a, b) in k1.local_coeffs().iter().zip(want1) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn zero_outside_and_at_endpoints() {
        for (l, j, rho) in [(4, 0, 1.0), (8, 3, 0.4), (6, 2, 0.9)] {
            let k = make_boundary_kernel(l, j, rho).unwrap();
            assert_eq!(k.eval(1.5), 0.0);
            assert_eq!(k.eval(-1.5), 0.0);
            let (lo, hi) = k.support();
            let scale = max_abs(&k);
            for e in [lo, hi] {
                assert!(k.eval(e).abs() < 1e-10 * scale);
                assert!(k.eval_derivative(e).abs() < 1e-9 * scale);
            }
        }
    }

    #[test]
    fn rejects_bad_orders_and_rho() {
        assert!(make_kernel(4, 4).is_err());
        assert!(make_kernel(1, 0).is_err());
        assert!(make_boundary_kernel(4, 0, 0.0).is_err());
        assert!(make_boundary_kernel(4, 0, -0.3).is_err());
        assert!(make_boundary_kernel(4, 0, 1.2).is_err());
    }

    #[test]
    fn boundary_at_one_is_interior() {
        for l in [2, 4, 8] {
            for j in 0..l.min(5) {
                assert_eq!(make_boundary_kernel(l, j, 1.0).unwrap(), make_kernel(l, j).unwrap());
            }
        }
    }

    #[test]
    fn half_support_boundary_moments() {
        let k = make_boundary_kernel(2, 0, 0.5).unwrap();
        assert!((k.moment(0) - 1.0).abs() < 1e-12);
        assert!(k.moment(1).abs() < 1e-12);
        // frozen from an exact rational solve of the 2x2 moment system
        let want = [1280.0, -320.0, -8320.0, -1600.0, 14080.0, 8960.0].map(|v| v / 729.0);
        for (a, b) in k.monomial_coeffs().iter().zip(want) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn reflection_flips_moment_signs() {
        let k = make_boundary_kernel(6, 2, 0.3).unwrap();
        let r = k.reflected();
        assert_eq!(r.support(), (-0.3, 1.0));
        for l in 0..6 {
            let sign = if (l + 2) % 2 == 0 { 1.0 } else { -1.0 };
            assert!((r.moment(l) - sign * k.moment(l)).abs() < 1e-9);
        }
    }

    #[test]
    fn interior_parity() {
        for j in 0..5 {
            let k = make_kernel(8, j).unwrap();
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            for &t in &[0.1, 0.37, 0.8] {
                assert_eq!(k.eval(-t), sign * k.eval(t));
            }
        }
    }

    #[test]
    fn near_one_converges_to_interior() {
        let a = make_boundary_kernel(8, 2, 0.999).unwrap();
        let b = make_kernel(8, 2).unwrap();
        let (ga, gb) = (a.gegenbauer_coeffs(), b.gegenbauer_coeffs());
        let gscale = gb.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..ga.len().max(gb.len()) {
            let (x, y) = (ga.get(k).copied().unwrap_or(0.0), gb.get(k).copied().unwrap_or(0.0));
            assert!((x - y).abs() <= 1e-2 * gscale, "coef {k}: {x} vs {y}");
        }
        let scale = max_abs(&b);
        for i in 0..=200 {
            let t = -1.0 + 1.999 * i as f64 / 200.0;
            assert!((a.eval(t) - b.eval(t)).abs() <= 1e-2 * scale, "t={t}");
        }
    }

    #[test]
    fn local_and_monomial_forms_agree() {
        let k = make_smooth_kernel(6, 2, 0.4, 3).unwrap();
        let m = k.monomial_coeffs();
        let local = k.local_coeffs();
        for &t in &[-0.9, -0.3, 0.0, 0.25, 0.39] {
            let direct = m.iter().rev().fold(0.0, |acc, &c| acc * t + c);
            assert!((direct - k.eval(t)).abs() < 1e-8 * k.eval(t).abs().max(1.0));
            let x = (t - k.center()) / k.half_width();
            let via_x = local.iter().rev().fold(0.0, |acc, &c| acc * x + c);
            assert!((via_x - k.eval(t)).abs() < 1e-9 * k.eval(t).abs().max(1.0));
        }
        let h = 1e-6;
        let fd = (k.eval(0.1 + h) - k.eval(0.1 - h)) / (2.0 * h);
        assert!((fd - k.eval_derivative(0.1)).abs() < 1e-5 * fd.abs().max(1.0));
    }

    #[test]
    fn l2_norm_of_biweight() {
        // int (15/16)^2 (1-t^2)^4 = 5/7
        assert!((make_kernel(2, 0).unwrap().l2_norm_sq() - 5.0 / 7.0).abs() < 1e-13);
    }

    #[test]
    fn cache_returns_same_kernel() {
        let fam = KernelFamily::new(4, BASE_SMOOTHNESS);
        let a = cached_kernel(fam, 1, 0.25, Edge::Right).unwrap();
        let b = cached_kernel(fam, 1, 0.2500001, Edge::Right).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(a.support(), (-0.25, 1.0));
        let interior = cached_kernel(fam, 1, 1.0, Edge::Right).unwrap();
        assert_eq!(*interior, make_kernel(4, 1).unwrap());
        let edge = cached_kernel(fam, 1, 0.0, Edge::Left).unwrap();
        assert_eq!(edge.support().1, RHO_RESOLUTION);
        let smoother = cached_kernel(KernelFamily::with_order(4), 1, 0.25, Edge::Right).unwrap();
        assert!(!Arc::ptr_eq(&a, &smoother));
    }

    #[test]
    fn smoother_kernels_keep_moments_and_flatten_at_ends() {
        for s in [3usize, 4, 6] {
            for (l, j, rho) in [(8, 0, 1.0), (8, 3, 0.5), (5, 1, 0.2)] {
                let k = make_smooth_kernel(l, j, rho, s).unwrap();
                assert!(k.degree() <= l - 1 + 2 * s && k.degree() + 1 >= l - 1 + 2 * s);
                for m in 0..l {
                    let want = if m == j { (-1f64).powi(j as i32) * factorial(j) } else { 0.0 };
                    assert!((k.moment(m) - want).abs() < 1e-9 * want.abs().max(1.0), "s={s} l={l} j={j} m={m}");
                }
                // t = -1 is x = -1: synthetic division by (x + 1) leaves no remainder s times
                let mut q = k.local_coeffs();
                let scale = q.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                for _ in 0..s {
                    let mut carry = 0.0;
                    let mut out = vec![0.0; q.len() - 1];
                    for i in (0..q.len()).rev() {
                        let c = q[i] + carry;
                        if i == 0 {
                            assert!(c.abs() < 1e-8 * scale, "s={s} l={l} j={j} remainder {c}");
                        } else {
                            out[i - 1] = c;
                            carry = -c;
                        }
                    }
                    q = out;
                }
            }
        }
        assert!(make_smooth_kernel(4, 0, 1.0, 1).is_err());
    }

    #[test]
    fn gegenbauer_norms_match_quadrature() {
        for s in [2usize, 4, 7] {
            let h = gegenbauer_norms(s, 9);
            let (xs, ws) = gauss_legendre(s + 10);
            for (k, hk) in h.iter().enumerate() {
                let q: f64 = xs
                    .iter()
                    .zip(&ws)
                    .map(|(&x, &w)| {
                        let ck = gegenbauer_values(s as f64 + 0.5, k + 1, x)[k];
                        w * (1.0 - x * x).powi(s as i32) * ck * ck
                    })
                    .sum();
                assert!((q - hk).abs() < 1e-12 * hk, "s={s} k={k}: {q} vs {hk}");
            }
        }
    }

    #[test]
    fn derivative_matches_finite_differences_near_edges() {
        let k = make_smooth_kernel(8, 3, 0.3, 4).unwrap();
        for &t in &[-0.999, -0.5, 0.0, 0.29] {
            let h = 1e-6;
            let fd = (k.eval(t + h) - k.eval(t - h)) / (2.0 * h);
            assert!((fd - k.eval_derivative(t)).abs() < 1e-5 * max_abs(&k), "t={t}");
        }
    }
}
