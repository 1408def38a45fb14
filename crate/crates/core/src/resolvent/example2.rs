//! Closed-form inversion for the family `g~(s) = P(s) / (s + a)^{k + r}`.
//!
//! Here `1/g~(s) = sum_{j<=r} alpha_j (s + a)^j + sum_l beta_l / (s - s_l)`,
//! which gives the inversion directly without going through `phi~`.

use super::decompose::{Pole, ResolventDecomposition};
use super::poly::{binomial, Polynomial, C64};
use crate::error::{DeconvError, Result};

#[derive(Clone, Debug)]
pub struct Example2Coefficients {
    pub a: f64,
    pub r: usize,
    /// `alpha_0 ..= alpha_r`, `alpha_r = 1`.
    pub alpha: Vec<f64>,
    /// Residues `beta_l` of `1/g~` at the roots of `P`.
    pub beta: Vec<C64>,
    pub roots: Vec<C64>,
}

/// `alpha` by the quotient recursion, the roots of `P` and the residues `beta_l`.
pub fn example2_coefficients(a: f64, rho: &[f64], r: usize) -> Result<Example2Coefficients> {
    if rho.is_empty() || (rho[0] - 1.0).abs() > 1e-12 {
        return Err(DeconvError::InvalidParameter("rho_0 must equal 1".into()));
    }
    if r == 0 {
        return Err(DeconvError::InvalidParameter("r must be at least 1".into()));
    }
    let k = rho.len() - 1;

    let mut alpha = vec![0.0; r + 1];
    alpha[r] = 1.0;
    for l in 1..=r {
        let lo = l.saturating_sub(k);
        alpha[r - l] = -(lo..l).map(|j| alpha[r - j] * rho[l - j]).sum::<f64>();
    }

    let shift = C64::new(a, 0.0);
    let p = rho.iter().enumerate().fold(Polynomial::zero(), |acc, (j, &rj)| {
        acc.add(&Polynomial::shifted_power(shift, k - j).scale(C64::new(rj, 0.0)))
    });
    let (clusters, _) = p.root_clusters();
    if clusters.iter().any(|c| c.multiplicity > 1) {
        return Err(DeconvError::RepeatedRoots);
    }
    let roots: Vec<C64> = clusters.iter().map(|c| c.center).collect();
    for (i, zi) in roots.iter().enumerate() {
        for zj in &roots[i + 1..] {
            if (zi - zj).norm() < 1e-6 * zi.norm().max(1.0) {
                return Err(DeconvError::RepeatedRoots);
            }
        }
    }

    let beta = roots
        .iter()
        .enumerate()
        .map(|(l, &sl)| {
            let mut v = (sl + shift).powi((k + r) as i32);
            for (j, &sj) in roots.iter().enumerate() {
                if j != l {
                    v /= sl - sj;
                }
            }
            v
        })
        .collect();

    Ok(Example2Coefficients { a, r, alpha, beta, roots })
}

impl Example2Coefficients {
    /// Equivalent resolvent decomposition, obtained by matching
    /// `f = q^{(r)} + sum_l q^{(l)} sum_{j>=l} C(j,l) a^{j-l} alpha_j + sum_l beta_l (e^{s_l .} * q)`
    /// against `f = q^{(r)} - sum_j b_j q^{(r-1-j)} - q * phi_1^{(r)}` with `B_r = 1`.
    pub fn to_decomposition(&self) -> ResolventDecomposition {
        let r = self.r;
        let a = self.a;
        let mut b = vec![0.0; r];
        for l in 0..r {
            let s: f64 = (l..=r)
                .map(|j| binomial(j, l) * a.powi((j - l) as i32) * self.alpha[j])
                .sum();
            b[r - 1 - l] = -s;
        }
        // phi_1^{(r)}(x) = -sum beta_l e^{s_l x}
        let poles: Vec<Pole> = self
            .roots
            .iter()
            .zip(&self.beta)
            .map(|(&s, &beta)| Pole { s, alpha: 1, a: vec![-beta / s.powi(r as i32)] })
            .collect();
        let a0: Vec<f64> = (0..r)
            .map(|j| {
                let from_poles: C64 = poles.iter().map(|p| p.a[0] * p.s.powi(j as i32)).sum();
                b[j] - from_poles.re
            })
            .collect();
        ResolventDecomposition::from_parts(r, 1.0, a0, poles, Vec::new())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k0_r1_gives_derivative_plus_a() {
        let c = example2_coefficients(5.0, &[1.0], 1).unwrap();
        assert_eq!(c.alpha, vec![0.0, 1.0]);
        assert!(c.roots.is_empty());
        let d = c.to_decomposition();
        // f = q' + a q  <=>  b_0 = -a
        assert!((d.b[0] + 5.0).abs() < 1e-14);
    }

    #[test]
    fn k1_r1_reproduces_three_term_estimator() {
        let (a, b) = (1.0, 2.0);
        let c = example2_coefficients(a, &[1.0, b], 1).unwrap();
        assert_eq!(c.alpha, vec![-b, 1.0]);
        assert!((c.roots[0] - C64::new(-(a + b), 0.0)).norm() < 1e-12);
        assert!((c.beta[0] - C64::new(b * b, 0.0)).norm() < 1e-12);
        let d = c.to_decomposition();
        // coefficient on q is -b_0 = a - b
        assert!((-d.b[0] - (a - b)).abs() < 1e-12);
        assert!((d.phi1_eval(0.7, 1) + b * b * (-(a + b) * 0.7f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn rejects_repeated_roots() {
        // P(s) = (s + a)^2 + 2 (s + a) + 1 = (s + a + 1)^2
        assert!(matches!(
            example2_coefficients(1.0, &[1.0, 2.0, 1.0], 2),
            Err(DeconvError::RepeatedRoots)
        ));
    }

    #[test]
    fn rejects_bad_leading_rho() {
        assert!(example2_coefficients(1.0, &[2.0, 1.0], 1).is_err());
    }
}
