use nalgebra::DMatrix;

use epflow_core::model::DriftModel;
use epflow_core::spectral::grid::validate_grid;
use epflow_core::spectral::{
    assemble, fk_propagate, fk_trajectory, leading_eigpair, BoundaryTerm, EigOptions, GridPolicy, GridSpec,
    InitialMeasure, SpectralError,
};

#[test]
fn node_ordering_runs_dimension_zero_fastest() {
    let g = GridSpec::new(vec![0.0, 0.0], vec![1.0, 2.0], vec![33, 33]).unwrap();
    let shape = g.interior_shape();
    assert_eq!(shape, vec![31, 31]);
    let mut x = [0.0; 2];
    g.node(0, &mut x);
    assert!((x[0] - g.spacing(0)).abs() < 1e-15 && (x[1] - g.spacing(1)).abs() < 1e-15);
    g.node(1, &mut x);
    assert!((x[0] - 2.0 * g.spacing(0)).abs() < 1e-15);
    g.node(31, &mut x);
    assert!((x[1] - 2.0 * g.spacing(1)).abs() < 1e-15);
}

#[test]
fn coarse_and_small_grids_are_refused() {
    let model = DriftModel::rotation(1.0);
    let coarse = GridSpec::cube(2, -5.0, 5.0, 32).unwrap();
    assert!(matches!(validate_grid(&model, 0.25, 0.05, &coarse), Err(SpectralError::GridTooCoarse { .. })));
    let small = GridSpec::cube(2, -0.5, 0.5, 201).unwrap();
    assert!(matches!(validate_grid(&model, 0.25, 0.5, &small), Err(SpectralError::BoxTooSmall { .. })));
    assert!(GridSpec::cube(2, -1.0, 1.0, 8).is_err());
}

#[test]
fn gradient_model_has_zero_spectral_bound() {
    let model = DriftModel::linear(DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.7]), DMatrix::zeros(2, 2)).unwrap();
    for alpha in [0.0, 0.3, 0.5] {
        let grid = GridPolicy::default().grid_for(&model, alpha, 0.5).unwrap();
        let res = leading_eigpair(&assemble(&model, alpha, 0.5, &grid).unwrap(), &EigOptions::default()).unwrap();
        assert!(res.lambda.abs() < 2e-3, "alpha {alpha}: {}", res.lambda);
        assert!(res.eigvec.iter().all(|v| *v >= -1e-8));
    }
}

#[test]
fn rotation_eigenvalue_is_eps_independent() {
    let model = DriftModel::rotation(1.0);
    let exact = 1.0 - 2f64.sqrt();
    for eps in [0.5, 0.25] {
        let grid = GridPolicy::default().grid_for(&model, 0.5, eps).unwrap();
        let res = leading_eigpair(&assemble(&model, 0.5, eps, &grid).unwrap(), &EigOptions::default()).unwrap();
        assert!((res.lambda - exact).abs() < 5e-3, "eps {eps}: {}", res.lambda);
        assert!(res.imag.abs() < 1e-9);
        assert!(res.residual < 1e-6);
    }
}

#[test]
fn fk_at_time_zero_is_one() {
    let model = DriftModel::rotation(1.0);
    let grid = GridSpec::cube(2, -6.0, 6.0, 81).unwrap();
    for lam in [InitialMeasure::Mu0, InitialMeasure::PointMass(vec![0.3, -0.2])] {
        for g in [BoundaryTerm::Constant, BoundaryTerm::GaussianBump { amplitude: 0.5 }] {
            let chi = fk_propagate(&model, 0.3, 0.5, &grid, &g, &lam, 0.0, 1e-3).unwrap();
            assert!((chi - 1.0).abs() < 1e-12, "{chi}");
        }
    }
}

#[test]
fn fk_at_alpha_zero_conserves_mass() {
    // α = 0, g ≡ 1: χ_t = E[1] = 1 up to boundary losses and discretization.
    let model = DriftModel::rotation(1.0);
    let grid = GridSpec::cube(2, -6.0, 6.0, 121).unwrap();
    let r = fk_trajectory(&model, 0.0, 0.5, &grid, &BoundaryTerm::Constant, &InitialMeasure::Mu0, &[0.5, 1.0], 1e-3)
        .unwrap();
    for chi in r.chi {
        assert!((chi - 1.0).abs() < 2e-3, "{chi}");
    }
}

#[test]
fn fk_rate_approaches_spectral_bound() {
    let model = DriftModel::rotation(1.0);
    let grid = GridSpec::cube(2, -6.0, 6.0, 121).unwrap();
    let r = fk_trajectory(&model, 0.5, 0.5, &grid, &BoundaryTerm::Constant, &InitialMeasure::Mu0, &[4.0, 8.0], 2e-3)
        .unwrap();
    let slope = (r.chi[1].ln() - r.chi[0].ln()) / 4.0;
    assert!((slope - (1.0 - 2f64.sqrt())).abs() < 1e-2, "{slope}");
}
