use serde::Serialize;

use super::exppoly::{pole_coefficients, ExpPoly, ExpTerm};
use super::kernel::RationalLaplaceKernel;
use super::poly::{binomial, factorial, Polynomial, C64, MERGE_TOL};
use crate::error::{DeconvError, Result};

/// Tolerance on imaginary residue of quantities that must be real.
const REALNESS_TOL: f64 = 1e-8;

/// A rational function `num / den`.
#[derive(Clone, Debug)]
pub struct RationalFunction {
    pub num: Polynomial,
    pub den: Polynomial,
}

impl RationalFunction {
    pub fn eval(&self, s: C64) -> C64 {
        if self.num.is_zero() {
            return C64::new(0.0, 0.0);
        }
        self.num.eval(s) / self.den.eval(s)
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }
}

/// Laplace transform of the resolvent, `(s^r g~ - B_r) / (s^r g~)`, as
/// `(s^r num - B_r den) / (s^r num)` with common powers of `s` cancelled.
pub fn phi_tilde(g: &RationalLaplaceKernel) -> RationalFunction {
    let (mut p, mut q) = unreduced_phi_tilde(g);
    if p.is_zero() {
        return RationalFunction { num: Polynomial::zero(), den: Polynomial::constant(C64::new(1.0, 0.0)) };
    }
    let small = |poly: &Polynomial| {
        let scale = poly.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
        poly.coeffs()[0].norm() <= 1e-12 * scale
    };
    while small(&p) && small(&q) {
        p = p.shift_down(1);
        q = q.shift_down(1);
    }
    RationalFunction { num: p, den: q }
}

fn unreduced_phi_tilde(g: &RationalLaplaceKernel) -> (Polynomial, Polynomial) {
    let q = g.num().shift_up(g.r());
    let p = q.sub(&g.den().scale(C64::new(g.b_r(), 0.0)));
    (p, q)
}

/// A pole `s_l` of the resolvent transform (a zero of `g~`) with multiplicity
/// `alpha` and coefficients `a_{l,0..alpha}`.
#[derive(Clone, Debug, Serialize)]
pub struct Pole {
    #[serde(serialize_with = "ser_complex")]
    pub s: C64,
    pub alpha: usize,
    #[serde(serialize_with = "ser_complex_vec")]
    pub a: Vec<C64>,
}

/// Resolvent `phi = phi_0 + phi_1` with polynomial part
/// `phi_0(x) = sum_j a0[j] x^j / j!` and
/// `phi_1(x) = sum_l sum_j a_{l,j} x^j e^{s_l x} / j!`.
#[derive(Clone, Debug, Serialize)]
pub struct ResolventDecomposition {
    pub r: usize,
    pub b_r: f64,
    pub a0: Vec<f64>,
    pub poles: Vec<Pole>,
    /// Coefficients multiplying `q^{(r-1-j)}` in the inversion formula.
    pub b: Vec<f64>,
    /// Largest imaginary residue dropped when forcing real outputs.
    pub max_imag_residue: f64,
    pub warnings: Vec<String>,
}

impl ResolventDecomposition {
    /// Assemble a decomposition and derive the `b_j`:
    /// `b_j = a0_j + sum_l sum_{i <= min(j, alpha_l - 1)} C(j, i) a_{l,i} s_l^{j-i}`.
    pub fn from_parts(r: usize, b_r: f64, a0: Vec<f64>, poles: Vec<Pole>, warnings: Vec<String>) -> Self {
        let mut max_imag: f64 = 0.0;
        let b = (0..r)
            .map(|j| {
                let mut acc = C64::new(a0.get(j).copied().unwrap_or(0.0), 0.0);
                for p in &poles {
                    for i in 0..=j.min(p.alpha - 1) {
                        acc += p.a[i] * p.s.powi((j - i) as i32) * binomial(j, i);
                    }
                }
                max_imag = max_imag.max(acc.im.abs() / acc.norm().max(1.0));
                acc.re
            })
            .collect();
        ResolventDecomposition { r, b_r, a0, poles, b, max_imag_residue: max_imag, warnings }
    }

    pub fn phi1(&self) -> ExpPoly {
        ExpPoly {
            terms: self
                .poles
                .iter()
                .map(|p| ExpTerm { rate: p.s, coeffs: p.a.clone() })
                .collect(),
        }
    }

    /// Whether `phi_1` vanishes identically.
    pub fn phi1_is_zero(&self) -> bool {
        self.poles.is_empty() || self.phi1().is_empty()
    }

    /// `deriv`-th derivative of `phi_1` at `x`, real part.
    pub fn phi1_eval(&self, x: f64, deriv: usize) -> f64 {
        if self.poles.is_empty() {
            return 0.0;
        }
        self.phi1().eval(x, deriv)
    }

    /// Polynomial part `phi_0(x)`.
    pub fn phi0_eval(&self, x: f64) -> f64 {
        self.a0
            .iter()
            .enumerate()
            .map(|(j, &a)| a * x.powi(j as i32) / factorial(j))
            .sum()
    }

    /// Full resolvent `phi(x) = phi_0(x) + phi_1(x)`.
    pub fn phi_eval(&self, x: f64) -> f64 {
        self.phi0_eval(x) + self.phi1_eval(x, 0)
    }

    /// `phi~(s)` rebuilt from the partial-fraction form.
    pub fn phi_tilde_eval(&self, s: C64) -> C64 {
        let mut total = C64::new(0.0, 0.0);
        let mut pow = s;
        for &a in &self.a0 {
            total += a / pow;
            pow *= s;
        }
        total + self.phi1().laplace(s)
    }
}

/// Pole decomposition of the resolvent transform of `g`.
///
/// The denominator `s^r num(s)` has the pole `0` of order `r` (feeding `a0`)
/// and one pole per zero of `g~`. Coefficients come from local Taylor
/// expansions at each (possibly merged) root.
pub fn decompose(g: &RationalLaplaceKernel) -> Result<ResolventDecomposition> {
    let r = g.r();
    let (p, _) = unreduced_phi_tilde(g);
    let mut warnings = g.warnings().to_vec();
    let zeros = g.zeros();
    if zeros.iter().any(|z| z.center.norm() < MERGE_TOL) {
        return Err(DeconvError::InvalidKernel(
            "g~ vanishes at s = 0; the resolvent has no integrable decomposition".into(),
        ));
    }
    let mut poles: Vec<(C64, usize)> = vec![(C64::new(0.0, 0.0), r)];
    poles.extend(zeros.iter().map(|z| (z.center, z.multiplicity)));
    let mut coeffs = pole_coefficients(&p, g.num().leading(), &poles);

    // conjugate symmetry: copy coefficients of the upper-half-plane partner
    for l in 1..poles.len() {
        if poles[l].0.im < 0.0 {
            if let Some(m) = (1..poles.len()).find(|&m| poles[m].0 == poles[l].0.conj()) {
                coeffs[l] = coeffs[m].iter().map(|c| c.conj()).collect();
            }
        }
    }

    let mut max_imag: f64 = 0.0;
    let a0: Vec<f64> = coeffs[0]
        .iter()
        .map(|c| {
            max_imag = max_imag.max(c.im.abs() / c.norm().max(1.0));
            c.re
        })
        .collect();
    let pole_list: Vec<Pole> = poles[1..]
        .iter()
        .zip(coeffs.into_iter().skip(1))
        .map(|(&(s, alpha), a)| Pole { s, alpha, a })
        .collect();
    if max_imag > REALNESS_TOL {
        warnings.push(format!("polynomial-part coefficients carried imaginary residue {max_imag:.2e}"));
    }
    let mut d = ResolventDecomposition::from_parts(r, g.b_r(), a0, pole_list, warnings);
    d.max_imag_residue = d.max_imag_residue.max(max_imag);
    if d.max_imag_residue > REALNESS_TOL {
        d.warnings.push(format!("b_j carried imaginary residue {:.2e}", d.max_imag_residue));
    }
    Ok(d)
}

fn ser_complex<S: serde::Serializer>(z: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(2))?;
    seq.serialize_element(&z.re)?;
    seq.serialize_element(&z.im)?;
    seq.end()
}

fn ser_complex_vec<S: serde::Serializer>(v: &[C64], s: S) -> std::result::Result<S::Ok, S::Error> {
    let pairs: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
    serde::Serialize::serialize(&pairs, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g1(a: f64, b: f64) -> RationalLaplaceKernel {
        // b^3 / ((s+a)^2 ((s+a)^2 + b^2))
        let sa2 = Polynomial::shifted_power(C64::new(a, 0.0), 2);
        let den = sa2.mul(&sa2.add(&Polynomial::constant(C64::new(b * b, 0.0))));
        RationalLaplaceKernel::new(Polynomial::from_real(&[b * b * b]), den, "g1").unwrap()
    }

    #[test]
    fn g2_phi_tilde_is_minus_a_over_s() {
        let g = RationalLaplaceKernel::from_real(&[1.0], &[5.0, 1.0], "g2").unwrap();
        let pt = phi_tilde(&g);
        for &s in &[C64::new(1.0, 0.5), C64::new(-2.0, 3.0)] {
            assert!((pt.eval(s) - (-5.0 / s)).norm() < 1e-12);
        }
        let d = decompose(&g).unwrap();
        assert_eq!(d.a0.len(), 1);
        assert!((d.a0[0] + 5.0).abs() < 1e-12);
        assert!(d.poles.is_empty());
        assert!((d.b[0] + 5.0).abs() < 1e-12);
    }

    #[test]
    fn g1_phi_tilde_matches_closed_form() {
        let (a, b) = (5.0, 2.0);
        let g = g1(a, b);
        assert_eq!(g.r(), 4);
        assert_eq!(g.b_r(), 8.0);
        let pt = phi_tilde(&g);
        for &s in &[C64::new(0.7, 0.1), C64::new(-1.0, 2.0), C64::new(3.0, -4.0)] {
            let want = -(4.0 * a / s
                + (6.0 * a * a + b * b) / s.powi(2)
                + (4.0 * a.powi(3) + 2.0 * a * b * b) / s.powi(3)
                + (a.powi(4) + a * a * b * b) / s.powi(4));
            assert!((pt.eval(s) - want).norm() < 1e-10 * want.norm());
        }
    }

    #[test]
    fn g1_decomposition_values() {
        let d = decompose(&g1(5.0, 2.0)).unwrap();
        let want = [-20.0, -154.0, -540.0, -725.0];
        for (got, w) in d.a0.iter().zip(want) {
            assert!((got - w).abs() < 1e-9, "{got} vs {w}");
        }
        assert!(d.poles.is_empty());
        assert!(d.phi1_is_zero());
        for (got, w) in d.b.iter().zip(want) {
            assert!((got - w).abs() < 1e-9);
        }
    }

    #[test]
    fn pure_monomial_has_zero_resolvent() {
        let g = RationalLaplaceKernel::from_real(&[2.0], &[0.0, 0.0, 1.0], "2/s^2").unwrap();
        assert!(phi_tilde(&g).is_zero());
        let d = decompose(&g).unwrap();
        assert!(d.a0.iter().all(|a| a.abs() < 1e-14));
        assert!(d.phi1_is_zero());
        assert_eq!(d.phi_eval(3.0), 0.0);
    }

    #[test]
    fn k1_family_pole_and_estimator_coefficients() {
        let (a, b) = (1.0, 2.0);
        let g = RationalLaplaceKernel::exp_poly_family(a, 1, &[1.0, b]).unwrap();
        let d = decompose(&g).unwrap();
        assert_eq!(d.poles.len(), 1);
        let p = &d.poles[0];
        assert!((p.s - C64::new(-(a + b), 0.0)).norm() < 1e-12);
        // phi_1(x) = b^2/(a+b) e^{-(a+b)x}, so phi_1'(x) = -b^2 e^{-(a+b)x}
        assert!((p.a[0].re - b * b / (a + b)).abs() < 1e-12);
        assert!((d.phi1_eval(0.0, 1) + b * b).abs() < 1e-12);
        // f = q' - b_0 q - q * phi_1': b_0 = b - a
        assert!((d.b[0] - (b - a)).abs() < 1e-12);
    }

    #[test]
    fn decomposition_reconstructs_phi_tilde() {
        let roots = [
            C64::new(-4.0, 2.5),
            C64::new(-4.0, -2.5),
            C64::new(-0.75, 1.5),
            C64::new(-0.75, -1.5),
        ];
        let num = Polynomial::from_roots(&roots);
        let den = Polynomial::shifted_power(C64::new(1.0, 0.0), 7);
        let g = RationalLaplaceKernel::new(num, den, "g4").unwrap();
        let d = decompose(&g).unwrap();
        assert_eq!(d.poles.len(), 4);
        let pt = phi_tilde(&g);
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..20 {
            let s = C64::new(next() * 10.0 - 5.0, next() * 10.0 - 5.0);
            let direct = pt.eval(s);
            let rebuilt = d.phi_tilde_eval(s);
            assert!((direct - rebuilt).norm() <= 1e-8 * direct.norm(), "{s}: {direct} vs {rebuilt}");
        }
        assert!(d.max_imag_residue < 1e-8);
    }

    #[test]
    fn multiple_zero_uses_taylor_expansion() {
        // g~ = (s+2)^2 / (s+1)^4 : zero of multiplicity 2
        let num = Polynomial::shifted_power(C64::new(2.0, 0.0), 2);
        let den = Polynomial::shifted_power(C64::new(1.0, 0.0), 4);
        let g = RationalLaplaceKernel::new(num, den, "double zero").unwrap();
        let d = decompose(&g).unwrap();
        assert_eq!(d.poles.len(), 1);
        assert_eq!(d.poles[0].alpha, 2);
        let pt = phi_tilde(&g);
        for &s in &[C64::new(0.5, 1.0), C64::new(-3.0, -0.5)] {
            assert!((pt.eval(s) - d.phi_tilde_eval(s)).norm() < 1e-9 * pt.eval(s).norm());
        }
    }
}
