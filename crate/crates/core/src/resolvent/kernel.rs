use super::exppoly::{pole_coefficients, ExpPoly, ExpTerm};
use super::poly::{Polynomial, RootCluster, C64};
use crate::error::{DeconvError, Result};

/// A convolution kernel `g` given by its rational Laplace transform
/// `g~(s) = num(s) / den(s)`.
///
/// `r = deg(den) - deg(num)` is the order of the first non-vanishing derivative
/// of `g` at zero (`g^{(r-1)}(0) = B_r`), and `B_r = lc(num) / lc(den)`.
#[derive(Clone, Debug)]
pub struct RationalLaplaceKernel {
    num: Polynomial,
    den: Polynomial,
    r: usize,
    b_r: f64,
    description: String,
    zeros: Vec<RootCluster>,
    poles: Vec<RootCluster>,
    stable: bool,
    warnings: Vec<String>,
}

impl RationalLaplaceKernel {
    pub fn new(num: Polynomial, den: Polynomial, description: impl Into<String>) -> Result<Self> {
        let (dn, dd) = match (num.degree(), den.degree()) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(DeconvError::InvalidKernel("numerator and denominator must be nonzero".into())),
        };
        if dd <= dn {
            return Err(DeconvError::InvalidKernel(format!(
                "transform must be strictly proper (deg num = {dn}, deg den = {dd})"
            )));
        }
        if !num.is_real(1e-12) || !den.is_real(1e-12) {
            return Err(DeconvError::InvalidKernel("coefficients must be real".into()));
        }
        let num = Polynomial::from_real(&num.real_coeffs());
        let den = Polynomial::from_real(&den.real_coeffs());
        let b_r = num.leading().re / den.leading().re;
        if !b_r.is_finite() || b_r == 0.0 {
            return Err(DeconvError::InvalidKernel("B_r must be finite and nonzero".into()));
        }
        let (zeros, mut warnings) = num.root_clusters();
        let (poles, w2) = den.root_clusters();
        warnings.extend(w2);
        for z in &zeros {
            for p in &poles {
                let scale = z.center.norm().max(p.center.norm()).max(1.0);
                if (z.center - p.center).norm() < 1e-8 * scale {
                    return Err(DeconvError::InvalidKernel(format!(
                        "numerator and denominator share the root {:.6}",
                        z.center
                    )));
                }
            }
        }
        let stable = zeros.iter().all(|z| z.center.re < 0.0);
        if !stable {
            warnings.push("g~ has zeros with non-negative real part; the resolvent is not integrable".into());
        }
        Ok(RationalLaplaceKernel {
            num,
            den,
            r: dd - dn,
            b_r,
            description: description.into(),
            zeros,
            poles,
            stable,
            warnings,
        })
    }

    pub fn from_real(num: &[f64], den: &[f64], description: impl Into<String>) -> Result<Self> {
        Self::new(Polynomial::from_real(num), Polynomial::from_real(den), description)
    }

    /// The parametric family `g~(s) = P(s) / (s + a)^{k + r}` with
    /// `P(s) = sum_j rho_j (s + a)^{k - j}` and `rho_0 = 1`, i.e.
    /// `g(t) = e^{-at} t^{r-1} sum_j rho_j t^j / (j + r - 1)!`.
    pub fn exp_poly_family(a: f64, r: usize, rho: &[f64]) -> Result<Self> {
        if r == 0 {
            return Err(DeconvError::InvalidKernel("r must be at least 1".into()));
        }
        if rho.is_empty() || (rho[0] - 1.0).abs() > 1e-12 {
            return Err(DeconvError::InvalidKernel("rho_0 must equal 1".into()));
        }
        let k = rho.len() - 1;
        let shift = C64::new(a, 0.0);
        let p = rho
            .iter()
            .enumerate()
            .fold(Polynomial::zero(), |acc, (j, &rj)| {
                acc.add(&Polynomial::shifted_power(shift, k - j).scale(C64::new(rj, 0.0)))
            });
        let den = Polynomial::shifted_power(shift, k + r);
        Self::new(p, den, format!("exp-poly(a={a}, r={r}, rho={rho:?})"))
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn b_r(&self) -> f64 {
        self.b_r
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// Zeros of `g~` with multiplicities.
    pub fn zeros(&self) -> &[RootCluster] {
        &self.zeros
    }

    /// Poles of `g~` with multiplicities.
    pub fn poles(&self) -> &[RootCluster] {
        &self.poles
    }

    /// Whether every zero of `g~` has negative real part.
    pub fn is_stable(&self) -> bool {
        self.stable
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn laplace(&self, s: C64) -> C64 {
        self.num.eval(s) / self.den.eval(s)
    }

    /// `g` in the time domain as an exponential polynomial.
    pub fn impulse_response(&self) -> ExpPoly {
        let poles: Vec<(C64, usize)> = self.poles.iter().map(|p| (p.center, p.multiplicity)).collect();
        let coeffs = pole_coefficients(&self.num, self.den.leading(), &poles);
        ExpPoly {
            terms: poles
                .into_iter()
                .zip(coeffs)
                .map(|((rate, _), coeffs)| ExpTerm { rate, coeffs })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_and_constant() {
        let g2 = RationalLaplaceKernel::from_real(&[1.0], &[5.0, 1.0], "g2").unwrap();
        assert_eq!(g2.r(), 1);
        assert_eq!(g2.b_r(), 1.0);
        assert!(g2.is_stable());
    }

    #[test]
    fn rejects_improper_and_common_roots() {
        assert!(RationalLaplaceKernel::from_real(&[1.0, 1.0], &[5.0, 1.0], "x").is_err());
        // (s+1)/((s+1)(s+2))
        assert!(RationalLaplaceKernel::from_real(&[1.0, 1.0], &[2.0, 3.0, 1.0], "x").is_err());
    }

    #[test]
    fn instability_is_a_warning() {
        let g = RationalLaplaceKernel::from_real(&[-1.0, 1.0], &[2.0, 3.0, 1.0], "x").unwrap();
        assert!(!g.is_stable());
        assert!(!g.warnings().is_empty());
    }

    #[test]
    fn impulse_response_matches_closed_form() {
        // g3: e^{-t}(2t + 1)  <->  (s + 3)/(s + 1)^2
        let g = RationalLaplaceKernel::from_real(&[3.0, 1.0], &[1.0, 2.0, 1.0], "g3").unwrap();
        let e = g.impulse_response();
        for &t in &[0.0, 0.5, 2.0, 7.0] {
            let want = (-t as f64).exp() * (2.0 * t + 1.0);
            assert!((e.eval(t, 0) - want).abs() < 1e-10, "{t}");
        }
    }

    #[test]
    fn family_matches_time_domain_formula() {
        // k = 1, r = 1: g(t) = e^{-at}(bt + 1)
        let (a, b) = (1.0, 2.0);
        let g = RationalLaplaceKernel::exp_poly_family(a, 1, &[1.0, b]).unwrap();
        assert_eq!(g.r(), 1);
        assert_eq!(g.b_r(), 1.0);
        let e = g.impulse_response();
        for &t in &[0.0, 0.3, 3.0] {
            let want = (-a * t).exp() * (b * t + 1.0);
            assert!((e.eval(t, 0) - want).abs() < 1e-10);
        }
    }
}
