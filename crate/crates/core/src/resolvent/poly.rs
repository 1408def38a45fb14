//! Dense univariate polynomials with complex coefficients, root finding and
//! multiplicity detection.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::fmt;

pub type C64 = Complex64;

/// Relative magnitude below which trailing coefficients are dropped.
const TRIM_REL: f64 = 1e-12;

/// Roots closer than this (relative to `max(1, |z|)`) are merged unconditionally.
pub const MERGE_TOL: f64 = 1e-6;

/// Initial single-linkage radius for multiplicity detection. Candidate clusters
/// at this radius are only merged if the Taylor expansion at the cluster mean
/// confirms a root of the full multiplicity.
const CLUSTER_START_RADIUS: f64 = 0.1;

/// Polynomial with complex coefficients in ascending degree.
#[derive(Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<C64>,
}

/// A (possibly multiple) root.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootCluster {
    pub center: C64,
    pub multiplicity: usize,
    /// Largest distance of a raw eigenvalue from `center`.
    pub spread: f64,
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial{:?}", self.coeffs)
    }
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<C64>) -> Self {
        let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        while let Some(last) = coeffs.last() {
            if last.norm() <= TRIM_REL * scale || last.norm() == 0.0 {
                coeffs.pop();
            } else {
                break;
            }
        }
        Polynomial { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| C64::new(c, 0.0)).collect())
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn constant(c: C64) -> Self {
        Self::new(vec![c])
    }

    /// `s^k`
    pub fn monomial(k: usize) -> Self {
        let mut c = vec![C64::new(0.0, 0.0); k + 1];
        c[k] = C64::new(1.0, 0.0);
        Polynomial { coeffs: c }
    }

    /// Monic polynomial `prod (s - z)` over the given roots.
    pub fn from_roots(roots: &[C64]) -> Self {
        let mut p = Polynomial::constant(C64::new(1.0, 0.0));
        for &z in roots {
            p = p.mul(&Polynomial::new(vec![-z, C64::new(1.0, 0.0)]));
        }
        p
    }

    /// `(s + shift)^k` expanded in powers of `s`.
    pub fn shifted_power(shift: C64, k: usize) -> Self {
        let mut p = Polynomial::constant(C64::new(1.0, 0.0));
        let factor = Polynomial::new(vec![shift, C64::new(1.0, 0.0)]);
        for _ in 0..k {
            p = p.mul(&factor);
        }
        p
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> C64 {
        self.coeffs.last().copied().unwrap_or(C64::new(0.0, 0.0))
    }

    /// True when every imaginary part is below `tol` times the largest coefficient.
    pub fn is_real(&self, tol: f64) -> bool {
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        self.coeffs.iter().all(|c| c.im.abs() <= tol * scale.max(1e-300))
    }

    pub fn real_coeffs(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.re).collect()
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs
            .iter()
            .rev()
            .fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let zero = C64::new(0.0, 0.0);
        Self::new(
            (0..n)
                .map(|k| {
                    self.coeffs.get(k).copied().unwrap_or(zero)
                        + other.coeffs.get(k).copied().unwrap_or(zero)
                })
                .collect(),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, k: C64) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * k).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![C64::new(0.0, 0.0); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    /// Multiply by `s^k`.
    pub fn shift_up(&self, k: usize) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut c = vec![C64::new(0.0, 0.0); k];
        c.extend_from_slice(&self.coeffs);
        Polynomial { coeffs: c }
    }

    /// Divide by `s^k`, assuming the low coefficients are (numerically) zero.
    pub fn shift_down(&self, k: usize) -> Self {
        Self::new(self.coeffs.iter().skip(k).copied().collect())
    }

    /// Taylor coefficients `t_k` with `p(s) = sum t_k (s - z)^k`, for `k <= order`.
    pub fn taylor(&self, z: C64, order: usize) -> Vec<C64> {
        let mut work = self.coeffs.clone();
        let mut out = Vec::with_capacity(order + 1);
        for _ in 0..=order {
            if work.is_empty() {
                out.push(C64::new(0.0, 0.0));
                continue;
            }
            // synthetic division by (s - z): remainder is the next Taylor coefficient
            let d = work.len();
            let mut quotient = vec![C64::new(0.0, 0.0); d - 1];
            let mut acc = C64::new(0.0, 0.0);
            for k in (0..d).rev() {
                acc = acc * z + work[k];
                if k > 0 {
                    quotient[k - 1] = acc;
                }
            }
            out.push(acc);
            work = quotient;
        }
        out
    }

    /// Magnitude scale of the `k`-th Taylor coefficient's terms at `z`; used as a
    /// rounding floor when testing whether a Taylor coefficient vanishes.
    fn taylor_term_scale(&self, z: C64, k: usize) -> f64 {
        let r = z.norm();
        self.coeffs
            .iter()
            .enumerate()
            .skip(k)
            .map(|(i, c)| c.norm() * binomial(i, k) * r.powi((i - k) as i32))
            .sum()
    }

    /// Roots: companion-matrix eigenvalues, each followed by one Newton step.
    pub fn roots(&self) -> Vec<C64> {
        self.eigen_roots().into_iter().map(|z| self.newton_step(z)).collect()
    }

    fn newton_step(&self, z: C64) -> C64 {
        let pz = self.eval(z);
        let dpz = self.derivative().eval(z);
        if dpz.norm() == 0.0 {
            return z;
        }
        let cand = z - pz / dpz;
        if cand.is_finite() && self.eval(cand).norm() < pz.norm() {
            cand
        } else {
            z
        }
    }

    /// Unpolished companion-matrix eigenvalues. Perturbations of a multiple
    /// root spread symmetrically, so cluster means of these stay accurate.
    fn eigen_roots(&self) -> Vec<C64> {
        let deg = match self.degree() {
            None | Some(0) => return Vec::new(),
            Some(d) => d,
        };
        let lc = self.leading();
        if deg == 1 {
            return vec![-self.coeffs[0] / lc];
        }
        let monic: Vec<C64> = self.coeffs.iter().map(|&c| c / lc).collect();
        let raw: Vec<C64> = if self.is_real(0.0) {
            let mut m = DMatrix::<f64>::zeros(deg, deg);
            for i in 1..deg {
                m[(i, i - 1)] = 1.0;
            }
            for i in 0..deg {
                m[(i, deg - 1)] = -monic[i].re;
            }
            m.complex_eigenvalues().iter().copied().collect()
        } else {
            let mut m = DMatrix::<C64>::zeros(deg, deg);
            for i in 1..deg {
                m[(i, i - 1)] = C64::new(1.0, 0.0);
            }
            for i in 0..deg {
                m[(i, deg - 1)] = -monic[i];
            }
            let schur = m.schur();
            let (_, t) = schur.unpack();
            (0..deg).map(|i| t[(i, i)]).collect()
        };
        raw
    }

    /// Roots grouped into clusters with multiplicities. Returns the clusters
    /// (sorted by real then imaginary part) and human-readable warnings for
    /// every merge that took place.
    pub fn root_clusters(&self) -> (Vec<RootCluster>, Vec<String>) {
        let raw = self.eigen_roots();
        let mut warnings = Vec::new();
        let mut clusters = self.split_clusters(raw, CLUSTER_START_RADIUS, &mut warnings);
        for c in clusters.iter_mut().filter(|c| c.multiplicity == 1) {
            c.center = self.newton_step(c.center);
        }
        if self.is_real(0.0) {
            symmetrize_conjugates(&mut clusters);
        }
        clusters.sort_by(|a, b| {
            a.center
                .re
                .total_cmp(&b.center.re)
                .then(a.center.im.total_cmp(&b.center.im))
        });
        (clusters, warnings)
    }

    fn split_clusters(
        &self,
        members: Vec<C64>,
        radius: f64,
        warnings: &mut Vec<String>,
    ) -> Vec<RootCluster> {
        let mut out = Vec::new();
        for group in single_linkage(&members, radius) {
            let m = group.len();
            let center = group.iter().sum::<C64>() / m as f64;
            let spread = group.iter().map(|z| (z - center).norm()).fold(0.0, f64::max);
            if m == 1 {
                out.push(RootCluster { center, multiplicity: 1, spread });
            } else if radius <= MERGE_TOL || self.confirms_multiple_root(center, m) {
                warnings.push(format!(
                    "merged {m} roots near {center:.6} (spread {spread:.2e}) into one pole of multiplicity {m}"
                ));
                out.push(RootCluster { center, multiplicity: m, spread });
            } else {
                out.extend(self.split_clusters(group, radius / 10.0, warnings));
            }
        }
        out
    }

    fn confirms_multiple_root(&self, center: C64, m: usize) -> bool {
        let t = self.taylor(center, m);
        let top = t[m].norm();
        if top == 0.0 {
            return false;
        }
        let tol = MERGE_TOL * center.norm().max(1.0);
        (0..m).all(|k| {
            let floor = 1e4 * f64::EPSILON * self.taylor_term_scale(center, k);
            t[k].norm() <= tol.powi((m - k) as i32) * top || t[k].norm() <= floor
        })
    }
}

/// Binomial coefficient as a float.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

fn single_linkage(points: &[C64], radius: f64) -> Vec<Vec<C64>> {
    let n = points.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(label: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while label[r] != r {
            r = label[r];
        }
        label[i] = r;
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let scale = points[i].norm().max(points[j].norm()).max(1.0);
            if (points[i] - points[j]).norm() <= radius * scale {
                let (a, b) = (find(&mut label, i), find(&mut label, j));
                if a != b {
                    label[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<(usize, Vec<C64>)> = Vec::new();
    for i in 0..n {
        let root = find(&mut label, i);
        match groups.iter_mut().find(|(r, _)| *r == root) {
            Some((_, g)) => g.push(points[i]),
            None => groups.push((root, vec![points[i]])),
        }
    }
    groups.into_iter().map(|(_, g)| g).collect()
}

/// For real polynomials: snap near-real roots onto the axis and make complex
/// roots exact conjugate pairs.
fn symmetrize_conjugates(clusters: &mut [RootCluster]) {
    let n = clusters.len();
    let mut paired = vec![false; n];
    for i in 0..n {
        let c = clusters[i].center;
        let scale = c.norm().max(1.0);
        if c.im.abs() <= 1e-9 * scale {
            clusters[i].center.im = 0.0;
            paired[i] = true;
        }
    }
    for i in 0..n {
        if paired[i] || clusters[i].center.im < 0.0 {
            continue;
        }
        let target = clusters[i].center.conj();
        let partner = (0..n)
            .filter(|&k| !paired[k] && k != i && clusters[k].multiplicity == clusters[i].multiplicity)
            .min_by(|&a, &b| {
                (clusters[a].center - target)
                    .norm()
                    .total_cmp(&(clusters[b].center - target).norm())
            });
        if let Some(k) = partner {
            let mid = (clusters[i].center + clusters[k].center.conj()) / 2.0;
            clusters[i].center = mid;
            clusters[k].center = mid.conj();
            paired[i] = true;
            paired[k] = true;
        }
    }
}
