use super::poly::{binomial, factorial, Polynomial, C64};

/// One group `sum_j c_j x^j e^{rate x} / j!` of an exponential polynomial.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpTerm {
    pub rate: C64,
    pub coeffs: Vec<C64>,
}

/// Exponential polynomial `sum_l sum_j c_{l,j} x^j e^{s_l x} / j!`, the inverse
/// Laplace transform of `sum_l sum_j c_{l,j} / (s - s_l)^{j+1}`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExpPoly {
    pub terms: Vec<ExpTerm>,
}

impl ExpPoly {
    pub fn is_empty(&self) -> bool {
        self.terms.iter().all(|t| t.coeffs.iter().all(|c| c.norm() == 0.0))
    }

    /// `deriv`-th derivative at `x`, complex-valued.
    pub fn eval_complex(&self, x: f64, deriv: usize) -> C64 {
        let mut total = C64::new(0.0, 0.0);
        for term in &self.terms {
            let e = (term.rate * x).exp();
            // d^m/dx^m [x^j e^{sx} / j!] = sum_i C(m,i) x^{j-i}/(j-i)! s^{m-i} e^{sx}
            let mut acc = C64::new(0.0, 0.0);
            for (j, &c) in term.coeffs.iter().enumerate() {
                if c.norm() == 0.0 {
                    continue;
                }
                let mut inner = C64::new(0.0, 0.0);
                for i in 0..=deriv.min(j) {
                    let xp = x.powi((j - i) as i32) / factorial(j - i);
                    inner += term.rate.powi((deriv - i) as i32) * (binomial(deriv, i) * xp);
                }
                acc += c * inner;
            }
            total += acc * e;
        }
        total
    }

    /// Real part of [`ExpPoly::eval_complex`]; conjugate-paired terms make the
    /// imaginary part vanish up to rounding.
    pub fn eval(&self, x: f64, deriv: usize) -> f64 {
        self.eval_complex(x, deriv).re
    }

    /// The Laplace transform `sum c_{l,j} / (s - s_l)^{j+1}` at `s`.
    pub fn laplace(&self, s: C64) -> C64 {
        let mut total = C64::new(0.0, 0.0);
        for term in &self.terms {
            let d = s - term.rate;
            let mut pow = d;
            for &c in &term.coeffs {
                total += c / pow;
                pow *= d;
            }
        }
        total
    }
}

/// Partial-fraction coefficients of `numer / (lead * prod_l (s - s_l)^{alpha_l})`
/// for a strictly proper quotient: returns, per pole, `c_{l,0..alpha_l}` with
/// the quotient equal to `sum_l sum_j c_{l,j} / (s - s_l)^{j+1}`.
///
/// Each pole's coefficients come from the local Taylor expansion of
/// `(s - s_l)^{alpha_l} * quotient`, which avoids repeated differentiation.
pub fn pole_coefficients(numer: &Polynomial, lead: C64, poles: &[(C64, usize)]) -> Vec<Vec<C64>> {
    poles
        .iter()
        .enumerate()
        .map(|(l, &(sl, alpha))| {
            let mut rest = Polynomial::constant(lead);
            for (m, &(sm, am)) in poles.iter().enumerate() {
                if m != l {
                    rest = rest.mul(&Polynomial::from_roots(&vec![sm; am]));
                }
            }
            let tn = numer.taylor(sl, alpha - 1);
            let tq = rest.taylor(sl, alpha - 1);
            let mut h = vec![C64::new(0.0, 0.0); alpha];
            for k in 0..alpha {
                let mut acc = tn[k];
                for i in 1..=k {
                    acc -= tq[i] * h[k - i];
                }
                h[k] = acc / tq[0];
            }
            (0..alpha).map(|j| h[alpha - 1 - j]).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_exponential_derivatives() {
        let e = ExpPoly {
            terms: vec![ExpTerm { rate: C64::new(-2.0, 0.0), coeffs: vec![C64::new(3.0, 0.0)] }],
        };
        for m in 0..5 {
            let want = 3.0 * (-2.0f64).powi(m as i32) * (-2.0 * 0.7f64).exp();
            assert!((e.eval(0.7, m) - want).abs() < 1e-13);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let e = ExpPoly {
            terms: vec![
                ExpTerm {
                    rate: C64::new(-1.0, 2.0),
                    coeffs: vec![C64::new(0.5, 1.0), C64::new(-2.0, 0.3), C64::new(1.0, 0.0)],
                },
                ExpTerm {
                    rate: C64::new(-1.0, -2.0),
                    coeffs: vec![C64::new(0.5, -1.0), C64::new(-2.0, -0.3), C64::new(1.0, 0.0)],
                },
            ],
        };
        let h = 1e-5;
        for d in 0..4 {
            for &x in &[0.1, 1.3, 4.0] {
                let fd = (e.eval(x + h, d) - e.eval(x - h, d)) / (2.0 * h);
                let an = e.eval(x, d + 1);
                assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "d={d} x={x}: {fd} vs {an}");
                assert!(e.eval_complex(x, d).im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn partial_fractions_reconstruct_rational() {
        // (s + 3) / ((s + 1)^2 (s + 2))
        let numer = Polynomial::from_real(&[3.0, 1.0]);
        let poles = [(C64::new(-1.0, 0.0), 2), (C64::new(-2.0, 0.0), 1)];
        let coeffs = pole_coefficients(&numer, C64::new(1.0, 0.0), &poles);
        let e = ExpPoly {
            terms: poles
                .iter()
                .zip(coeffs)
                .map(|(&(rate, _), coeffs)| ExpTerm { rate, coeffs })
                .collect(),
        };
        for &s in &[C64::new(0.3, 0.2), C64::new(-5.0, 1.0), C64::new(2.0, -3.0)] {
            let direct = numer.eval(s) / ((s + 1.0) * (s + 1.0) * (s + 2.0));
            assert!((e.laplace(s) - direct).norm() < 1e-12 * direct.norm());
        }
    }
}
