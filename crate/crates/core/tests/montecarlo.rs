use epflow_core::model::DriftModel;
use epflow_core::montecarlo::{self, estimate_mean_ep, estimate_mean_ep_stationary, Init, SimConfig};
use epflow_core::ratefn::local_means;

fn mean_channel_gap(model: &DriftModel, dt: f64) -> f64 {
    let cfg = SimConfig::new(0.5, dt, 2.0, 400, 5, Init::Point(vec![1.0, 0.0]));
    let ens = montecarlo::simulate(model, &cfg).unwrap();
    let d: Vec<f64> = ens.samples.iter().zip(&ens.strat_samples).map(|(a, b)| (a - b).abs()).collect();
    montecarlo::pairwise_sum(&d) / d.len() as f64
}

#[test]
fn channel_gap_shrinks_for_nonlinear_field() {
    // Pathwise Itô/midpoint difference is O(√dt) for nonlinear b.
    let model = DriftModel::twowell(1.0, 0.3);
    let coarse = mean_channel_gap(&model, 2e-3);
    let fine = mean_channel_gap(&model, 5e-4);
    assert!(coarse > 1e-6, "{coarse}");
    let ratio = coarse / fine;
    assert!((1.6..2.6).contains(&ratio), "gap {coarse:e} -> {fine:e}, ratio {ratio}");
}

#[test]
fn channels_coincide_for_linear_skew_field() {
    let gap = mean_channel_gap(&DriftModel::rotation(1.0), 1e-3);
    assert!(gap < 1e-10, "{gap}");
}

#[test]
fn stationary_estimator_matches_rotation_mean() {
    let est = estimate_mean_ep_stationary(&DriftModel::rotation(1.0), 0.5, 400.0, 2e-3, 3, 10.0).unwrap();
    assert!((est.value - 2.0).abs() <= 4.0 * est.se + 0.02, "{} +- {}", est.value, est.se);
}

#[test]
fn twowell_small_noise_mean_sits_in_flat_interval() {
    // Long-run mean lies between the per-well rates.
    let model = DriftModel::twowell(1.0, 0.3);
    let means: Vec<f64> = local_means(&model).unwrap().into_iter().map(|(_, m)| m).collect();
    let (lo, hi) = (means[0].min(means[1]), means[0].max(means[1]));
    let cfg = SimConfig::new(0.1, 1e-3, 10.0, 400, 17, Init::Point(vec![1.0, 0.0]));
    let est = estimate_mean_ep(&montecarlo::simulate(&model, &cfg).unwrap());
    assert!(est.mean_ep_rate.mean > lo - 0.5 && est.mean_ep_rate.mean < hi + 0.5, "{:?} vs [{lo}, {hi}]", est.mean_ep_rate);
}

#[test]
fn second_moment_stays_bounded() {
    let cfg = SimConfig::new(0.5, 1e-3, 5.0, 200, 1, Init::Point(vec![3.0, -3.0]));
    let ens = montecarlo::simulate(&DriftModel::rotation(1.0), &cfg).unwrap();
    let first = ens.second_moments.first().unwrap().1;
    let last = ens.second_moments.last().unwrap().1;
    assert!((first - 18.0).abs() < 1e-12);
    // Stationary E|X|² = 2ε for V = ½|x|².
    assert!((last - 1.0).abs() < 0.3, "{last}");
}
