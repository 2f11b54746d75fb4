use proptest::prelude::*;

use epflow_core::model::DriftModel;
use epflow_core::ratefn::{
    admissible_pair, alpha_interval, default_alpha_grid, default_sigma_grid, derivative_range, legendre,
    rate_gc_defect, region_raster, semiclassical_cgf, AdmissibilityQuery, CgfCurve, RateError,
};

proptest! {
    #[test]
    fn admissible_pair_symmetric_at_p_two(k_b in 0.0f64..0.5, h_b in 0.0f64..5.0, alpha in -2.0f64..3.0) {
        let q = |a| admissible_pair(&AdmissibilityQuery { k_b, h_b, alpha: a, p: 2.0 });
        prop_assert_eq!(q(alpha), q(1.0 - alpha));
    }

    #[test]
    fn unit_segment_admissible_at_p_two(k_b in 0.0f64..0.499, h_b in 0.0f64..5.0, alpha in 0.0f64..=1.0) {
        let q = AdmissibilityQuery { k_b, h_b, alpha, p: 2.0 };
        prop_assert!(admissible_pair(&q));
    }

    #[test]
    fn larger_h_b_shrinks_region(k_b in 0.0f64..0.5, h1 in 0.0f64..3.0, dh in 0.0f64..3.0,
                                 alpha in -2.0f64..3.0, p in 1.0f64..5.0) {
        let small = admissible_pair(&AdmissibilityQuery { k_b, h_b: h1 + dh, alpha, p });
        let big = admissible_pair(&AdmissibilityQuery { k_b, h_b: h1, alpha, p });
        prop_assert!(!small || big);
    }

    #[test]
    fn alpha_interval_contains_unit_interval(k_b in 0.0f64..0.5, h_b in 0.01f64..10.0) {
        let (lo, hi) = alpha_interval(k_b, h_b).unwrap();
        prop_assert!(lo <= 0.0 && hi >= 1.0);
        prop_assert!((lo + hi - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn legendre_of_symmetric_parabola(a in 0.1f64..3.0) {
        // e(α) = a α(α − 1) satisfies e(1 − α) = e(α), so e₊(ς) − e₊(−ς) = −ς.
        let alphas: Vec<f64> = (0..=300).map(|k| -1.0 + k as f64 / 100.0).collect();
        let values = alphas.iter().map(|x| a * x * (x - 1.0)).collect();
        let curve = CgfCurve::from_samples(alphas, values).unwrap();
        let rf = legendre(&curve, &default_sigma_grid(derivative_range(&curve))).unwrap();
        prop_assert!(rf.values.iter().all(|v| *v >= -1e-12));
        prop_assert!(rate_gc_defect(&rf) <= 1e-9);
    }
}

#[test]
fn alpha_interval_examples() {
    let (lo, hi) = alpha_interval(0.0, 1.0).unwrap();
    assert!((lo - (0.5 - 0.5 * 2f64.sqrt())).abs() < 1e-15);
    assert!((hi - (0.5 + 0.5 * 2f64.sqrt())).abs() < 1e-15);
    let (lo, hi) = alpha_interval(0.4999999, 1.0).unwrap();
    assert!(lo > -1e-6 && hi < 1.0 + 1e-6);
    assert!(matches!(alpha_interval(0.5, 1.0), Err(RateError::InvalidConstants { .. })));
}

#[test]
fn raster_columns_at_or_below_one_are_empty() {
    let r = region_raster(0.33, 0.75, (-1.0, 2.0), (0.0, 4.0), (61, 41)).unwrap();
    for (ip, p) in r.ps.iter().enumerate() {
        if *p <= 1.0 {
            assert!((0..r.alphas.len()).all(|ia| !r.get(ia, ip)));
        }
    }
}

#[test]
fn non_convex_input_is_rejected() {
    let alphas: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
    let values = alphas.iter().map(|x| -(x - 0.5) * (x - 0.5)).collect();
    let curve = CgfCurve::from_samples(alphas, values).unwrap();
    assert!(matches!(legendre(&curve, &[0.0]), Err(RateError::NonConvexInput { .. })));
}

#[test]
fn twowell_curve_takes_max_over_minima() {
    let model = DriftModel::twowell(1.0, 0.3);
    let curve = semiclassical_cgf(&model, &default_alpha_grid(&model).unwrap()).unwrap();
    for k in 0..curve.alphas.len() {
        let best = curve.per_point.iter().map(|c| c[k]).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(curve.values[k], best);
        assert_eq!(curve.per_point[curve.argmax[k]][k], best);
    }
    // Saddle never wins on [0, 1] since its e_j(0) < 0 while minima give 0.
    let zero = curve.alphas.iter().position(|a| *a == 0.0).unwrap();
    assert!(curve.values[zero].abs() <= 1e-12);
}
