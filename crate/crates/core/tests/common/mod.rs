#![allow(dead_code)]

use num_rational::BigRational;
use lapdeconv::kernels::SmoothingKernel;
use num_traits::{One, ToPrimitive, Zero};

fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap()
}

/// `int t^l K(t) dt` of the kernel exactly as stored, in rational
/// arithmetic: the Gegenbauer polynomials of index `s + 1/2` have rational
/// coefficients and every f64 is a dyadic rational, so the only rounding is
/// the final conversion.
pub fn exact_moment(k: &SmoothingKernel, l: usize) -> f64 {
    let (c, w) = (rat(k.center()), rat(k.half_width()));
    let local = exact_local_coeffs(k);
    // (c + w x)^l in ascending powers of x
    let mut lin = vec![BigRational::one()];
    for _ in 0..l {
        let mut next = vec![BigRational::zero(); lin.len() + 1];
        for (i, v) in lin.iter().enumerate() {
            next[i] += v * &c;
            next[i + 1] += v * &w;
        }
        lin = next;
    }
    let two = BigRational::from_integer(2.into());
    let mut acc = BigRational::zero();
    for (a, b) in local.iter().enumerate() {
        if b.is_zero() {
            continue;
        }
        for (i, v) in lin.iter().enumerate() {
            // int_{-1}^{1} x^p dx = 2 / (p + 1) for even p
            let p = a + i;
            if p % 2 == 0 {
                acc += b * v * &two / BigRational::from_integer((p + 1).into());
            }
        }
    }
    (acc * w).to_f64().unwrap()
}

/// Monomial coefficients in `x` of `(1 - x^2)^s sum_k g_k C_k(x)`, exactly.
pub fn exact_local_coeffs(k: &SmoothingKernel) -> Vec<BigRational> {
    let s = k.smoothness();
    let int = |n: i64| BigRational::from_integer(n.into());
    // 2 lambda = 2s + 1
    let two_lambda = int(2 * s as i64 + 1);
    let g = k.gegenbauer_coeffs();
    let mut p = vec![BigRational::zero(); g.len()];
    let (mut prev, mut cur): (Vec<BigRational>, Vec<BigRational>) = (Vec::new(), vec![BigRational::one()]);
    for (n, &gn) in g.iter().enumerate() {
        for (i, c) in cur.iter().enumerate() {
            p[i] += rat(gn) * c;
        }
        // (n + 1) C_{n+1} = 2 (n + lambda) x C_n - (n + 2 lambda - 1) C_{n-1}
        let nr = int(n as i64);
        let up = (int(2) * &nr + &two_lambda) / (&nr + int(1));
        let down = (&nr + &two_lambda - int(1)) / (&nr + int(1));
        let mut next = vec![BigRational::zero(); cur.len() + 1];
        for (i, c) in cur.iter().enumerate() {
            next[i + 1] += &up * c;
        }
        for (i, c) in prev.iter().enumerate() {
            next[i] -= &down * c;
        }
        prev = std::mem::replace(&mut cur, next);
    }
    let mut out = p;
    for _ in 0..s {
        let mut next = vec![BigRational::zero(); out.len() + 2];
        for (i, c) in out.iter().enumerate() {
            next[i] += c;
            next[i + 2] -= c;
        }
        out = next;
    }
    out
}

/// `(-1)^j j!` at `l = j`, zero below `L` otherwise.
pub fn target_moment(l: usize, j: usize) -> f64 {
    if l == j {
        let f: f64 = (1..=j).map(|k| k as f64).product();
        if j % 2 == 0 { f } else { -f }
    } else {
        0.0
    }
}

/// Least-squares slope of `y` on `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
