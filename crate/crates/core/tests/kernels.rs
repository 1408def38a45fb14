mod common;

use lapdeconv::kernels::{cached_kernel, make_boundary_kernel, make_smooth_kernel, Edge, KernelFamily};
use proptest::prelude::*;

fn sign(k: usize) -> f64 {
    if k % 2 == 0 { 1.0 } else { -1.0 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn moments_hold_exactly_for_any_support(l in 2usize..=8, jj in 0usize..8, rho in 0.02f64..=1.0, s in 2usize..=6) {
        let j = jj % l;
        let k = make_smooth_kernel(l, j, rho, s).unwrap();
        for m in 0..l {
            let got = common::exact_moment(&k, m);
            let want = common::target_moment(m, j);
            prop_assert!((got - want).abs() < 1e-8 * want.abs().max(1.0), "m={m}: {got} vs {want}");
            // the library's own quadrature agrees with the exact value
            prop_assert!((k.moment(m) - got).abs() < 1e-9 * got.abs().max(1.0));
        }
    }

    #[test]
    fn reflection_mirrors_values_and_moments(l in 2usize..=8, jj in 0usize..8, rho in 0.05f64..=1.0, t in -1.0f64..1.0) {
        let j = jj % l;
        let k = make_boundary_kernel(l, j, rho).unwrap();
        let r = k.reflected();
        prop_assert_eq!(r.support(), (-rho, 1.0));
        prop_assert!((r.eval(-t) - sign(j) * k.eval(t)).abs() <= 1e-12 * k.eval(t).abs().max(1.0));
        for m in 0..l {
            let want = sign(m + j) * k.moment(m);
            prop_assert!((r.moment(m) - want).abs() < 1e-9 * want.abs().max(1.0));
        }
    }

    #[test]
    fn construction_is_deterministic(l in 2usize..=8, jj in 0usize..8, rho in 0.05f64..=1.0) {
        let j = jj % l;
        let a = make_boundary_kernel(l, j, rho).unwrap();
        let b = make_boundary_kernel(l, j, rho).unwrap();
        prop_assert_eq!(a.gegenbauer_coeffs(), b.gegenbauer_coeffs());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn flat_to_order_s_at_both_ends(l in 2usize..=8, jj in 0usize..8, rho in 0.1f64..=1.0, s in 2usize..=5) {
        let j = jj % l;
        let k = make_smooth_kernel(l, j, rho, s).unwrap();
        // K(e + d) / d^s settles to a finite limit as d -> 0
        for (e, dir) in [(-1.0, 1.0), (rho, -1.0)] {
            let ratio = |d: f64| k.eval(e + dir * d) / d.powi(s as i32);
            let (a, b) = (ratio(1e-4), ratio(5e-5));
            prop_assert!((a - b).abs() <= 1e-2 * a.abs().max(b.abs()).max(1e-300), "{a} vs {b}");
        }
    }
}

#[test]
fn cached_right_edge_kernel_matches_reflection() {
    let fam = KernelFamily::with_order(6);
    let right = cached_kernel(fam, 2, 0.4, Edge::Right).unwrap();
    let left = make_smooth_kernel(6, 2, 0.4, fam.smoothness).unwrap();
    assert_eq!(*right, left.reflected());
}
