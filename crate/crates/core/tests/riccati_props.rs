use nalgebra::DMatrix;
use proptest::prelude::*;

use epflow_core::riccati::{
    are_residual, build_coeffs, k_definite_interval, leading_eig_linear, solve_are, trace_via_hamiltonian,
    LocalLinearization, RiccatiError,
};

fn spd(n: usize, entries: &[f64], shift: f64) -> DMatrix<f64> {
    let a = DMatrix::from_column_slice(n, n, &entries[..n * n]);
    &a * a.transpose() + DMatrix::identity(n, n) * shift
}

prop_compose! {
    fn linearization()(n in 2usize..=3, c in prop::collection::vec(-1.0f64..1.0, 9),
                       bm in prop::collection::vec(-1.5f64..1.5, 9), shift in 0.2f64..2.0)
                      -> LocalLinearization<f64> {
        LocalLinearization::new(spd(n, &c, shift), DMatrix::from_column_slice(n, n, &bm[..n * n]))
    }
}

/// `α` at fraction `t ∈ (−1, 1)` of the way from ½ to the `K`-definite edge, clamped to `[−1, 2]`.
fn alpha_in(lin: &LocalLinearization<f64>, t: f64) -> f64 {
    let (lo, hi) = k_definite_interval(lin).expect("C − Bm nonsingular for these draws");
    let lo = lo.max(-1.0);
    let hi = hi.min(2.0);
    0.5 * (lo + hi) + 0.45 * t * (hi - lo)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn maximal_solution_certificates(lin in linearization(), t in -1.0f64..1.0) {
        let alpha = alpha_in(&lin, t);
        let co = build_coeffs(&lin, alpha);
        let sol = solve_are(&co).unwrap();
        prop_assert!(sol.residual <= 1e-10, "residual {}", sol.residual);
        prop_assert!(are_residual(&co, &sol.x).norm() <= 1e-10);
        prop_assert_eq!(&sol.x, &sol.x.transpose());
        prop_assert!(sol.stability_margin < 0.0);
        let tr = trace_via_hamiltonian(&co).unwrap();
        prop_assert!((tr - sol.x.trace()).abs() <= 1e-8);
    }

    #[test]
    fn local_curve_is_symmetric_about_half(lin in linearization(), t in -1.0f64..1.0) {
        let alpha = alpha_in(&lin, t);
        let a = leading_eig_linear(&lin, alpha).unwrap();
        let b = leading_eig_linear(&lin, 1.0 - alpha).unwrap();
        prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
    }

    #[test]
    fn local_curve_is_convex(lin in linearization(), t in -0.9f64..0.9) {
        let alpha = alpha_in(&lin, t);
        let h = 1e-3;
        let e = |a: f64| leading_eig_linear(&lin, a).unwrap();
        let d2 = e(alpha + h) - 2.0 * e(alpha) + e(alpha - h);
        prop_assert!(d2 >= -1e-10, "second difference {d2}");
    }

    #[test]
    fn zero_at_alpha_zero_and_one_for_minima(lin in linearization()) {
        // C ≻ 0 and Bm = MC with sym(M) small: X(0) = ½C.
        let n = lin.dim();
        let m = (lin.bm() - lin.bm().transpose()) * 0.5;
        let lin = LocalLinearization::new(lin.c().clone(), &m * lin.c());
        prop_assert!(leading_eig_linear(&lin, 0.0).unwrap().abs() <= 1e-12);
        prop_assert!(leading_eig_linear(&lin, 1.0).unwrap().abs() <= 1e-12);
        prop_assert_eq!(n, lin.dim());
    }

    #[test]
    fn scalar_case_matches_quadratic_formula(c in 0.2f64..3.0, bm in -2.0f64..2.0, t in -1.0f64..1.0) {
        let lin = LocalLinearization::new(DMatrix::from_element(1, 1, c), DMatrix::from_element(1, 1, bm));
        let alpha = alpha_in(&lin, t);
        let co = build_coeffs(&lin, alpha);
        let (b, k) = (co.b[(0, 0)], co.k[(0, 0)]);
        // x² − bx − k = 0, larger root.
        let exact = 0.5 * (b + (b * b + 4.0 * k).sqrt());
        let x = solve_are(&co).unwrap().x[(0, 0)];
        prop_assert!((x - exact).abs() <= 1e-12 * (1.0 + exact.abs()));
    }
}

#[test]
fn outside_the_definite_interval_the_split_fails() {
    let lin = LocalLinearization::new(DMatrix::identity(2, 2), DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 2.0, 0.0]));
    let (lo, hi) = k_definite_interval(&lin).unwrap();
    for alpha in [lo - 0.2, hi + 0.2] {
        assert!(matches!(solve_are(&build_coeffs(&lin, alpha)), Err(RiccatiError::SpectralSplitFailure { .. })));
    }
}

#[test]
fn k_definite_interval_of_gradient_case_is_unbounded() {
    let lin = LocalLinearization::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]), DMatrix::zeros(2, 2));
    let (lo, hi) = k_definite_interval(&lin).unwrap();
    assert!(lo < -1e100 && hi > 1e100);
}
