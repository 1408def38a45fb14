//! Small quadrature helpers.

/// Composite trapezoid rule on equispaced samples with step `dx`.
pub fn trapezoid_uniform(values: &[f64], dx: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            dx * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// Trapezoid rule on arbitrary sorted abscissae.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Romberg integration of `f` over `[a, b]` with at most `2^levels` panels.
/// Stops once two successive diagonal entries agree to `tol` (relative to
/// the magnitude of the estimate, floored at 1).
pub fn romberg(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, levels: usize) -> f64 {
    let mut prev_row = vec![0.5 * (b - a) * (f(a) + f(b))];
    for k in 1..=levels {
        let panels = 1usize << k;
        let h = (b - a) / panels as f64;
        let mid: f64 = (0..panels / 2).map(|i| f(a + (2 * i + 1) as f64 * h)).sum();
        let mut row = Vec::with_capacity(k + 1);
        row.push(0.5 * prev_row[0] + h * mid);
        let mut p4 = 1.0;
        for m in 1..=k {
            p4 *= 4.0;
            let v = row[m - 1] + (row[m - 1] - prev_row[m - 1]) / (p4 - 1.0);
            row.push(v);
        }
        let (new, old) = (row[k], prev_row[k - 1]);
        if k >= 4 && (new - old).abs() <= tol * new.abs().max(1.0) {
            return new;
        }
        prev_row = row;
    }
    prev_row[levels]
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // three-term recurrence for P_m and its derivative
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_to_degree_2m_minus_1() {
        for m in [1usize, 2, 5, 8] {
            let (x, w) = gauss_legendre(m);
            for d in 0..2 * m {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(d as i32)).sum();
                let want = if d % 2 == 1 { 0.0 } else { 2.0 / (d + 1) as f64 };
                assert!((got - want).abs() < 1e-14, "m={m} d={d}");
            }
        }
    }

    #[test]
    fn trapezoid_is_exact_for_lines() {
        let xs: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x + 1.0).collect();
        assert!((trapezoid_uniform(&ys, 0.1) - 2.5).abs() < 1e-14);
        assert!((trapezoid(&xs, &ys) - 2.5).abs() < 1e-14);
    }

    #[test]
    fn romberg_integrates_smooth_functions() {
        let v = romberg(|x: f64| x.exp(), 0.0, 2.0, 1e-13, 20);
        assert!((v - (2f64.exp() - 1.0)).abs() < 1e-12);
        let v = romberg(|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-13, 20);
        assert!((v - 2.0).abs() < 1e-12);
    }
}
