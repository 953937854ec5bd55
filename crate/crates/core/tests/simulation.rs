//! Monte Carlo checks against closed forms, and the seeding contract.

use rmt_repr::covariance::{build_covariance, CovarianceKind, CovarianceSpec, GroundTruth, ThetaKind};
use rmt_repr::empirical::{empirical_risk_mc, resolvent_mean, MapSource, McConfig};
use rmt_repr::experiments::{convergence_study, ConvergenceSpec, MapSpec, ModelSpec, Scenario, SimSpec, Size};
use rmt_repr::moments::{moments_for_map, moments_monte_carlo};
use rmt_repr::representation::{sample_reservoir, FeatureMap, ReservoirParams};
use rmt_repr::rmt::{risk_ridge_spectral, SolverOptions};
use rmt_repr::Matrix;

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn null_predictor_on_pure_noise() {
    let t = 10;
    let truth = GroundTruth::zero(t, 1, 0.7);
    let cfg = McConfig::new(30, 1e9, 200, 1);
    let e = empirical_risk_mc(
        &Matrix::identity(t, t),
        &truth,
        &MapSource::Fixed(FeatureMap::Identity { dim: t }),
        &cfg,
    )
    .unwrap();
    assert!((e.mean - 0.49).abs() <= 3.0 * e.std_error, "{} +- {}", e.mean, e.std_error);
}

#[test]
fn noise_floor_holds() {
    let t = 15;
    let sigma_u = build_covariance(&CovarianceSpec::ar1(0.5, t)).unwrap();
    let truth = GroundTruth::new(Matrix::from_fn(t, 1, |i, _| 0.8f64.powi(i as i32)), 0.5).unwrap();
    for lambda in [1e-3, 0.1, 10.0] {
        let e = empirical_risk_mc(
            &sigma_u,
            &truth,
            &MapSource::Fixed(FeatureMap::Identity { dim: t }),
            &McConfig::new(20, lambda, 50, 3),
        )
        .unwrap();
        assert!(e.mean >= 0.25 * (1.0 - 3.0 * e.std_error / 0.25));
    }
}

#[test]
fn per_trial_vectors_do_not_depend_on_threads() {
    let t = 12;
    let truth = GroundTruth::new(Matrix::from_element(t, 1, 0.3), 0.5).unwrap();
    let source = MapSource::Reservoir {
        n: 30,
        phi: 0.6,
        activation: rmt_repr::representation::Activation::Identity,
        normalization: Default::default(),
    };
    let mut cfg = McConfig::new(25, 0.05, 16, 11);
    cfg.resample_map = true;
    let run = || empirical_risk_mc(&Matrix::identity(t, t), &truth, &source, &cfg).unwrap();
    let serial = in_pool(1, run);
    let parallel = in_pool(4, run);
    assert_eq!(serial.per_trial, parallel.per_trial);
}

#[test]
fn doubling_trials_shrinks_error() {
    let t = 20;
    let truth = GroundTruth::new(Matrix::from_element(t, 1, 0.2), 0.5).unwrap();
    let source = MapSource::Fixed(FeatureMap::Identity { dim: t });
    let mut cfg = McConfig::new(30, 0.1, 100, 5);
    cfg.test_size = 200;
    let small = empirical_risk_mc(&Matrix::identity(t, t), &truth, &source, &cfg).unwrap();
    cfg.trials = 400;
    let large = empirical_risk_mc(&Matrix::identity(t, t), &truth, &source, &cfg).unwrap();
    // quadrupling the trials halves the standard error
    let ratio = large.std_error / small.std_error;
    assert!((0.35..0.7).contains(&ratio), "ratio {ratio}");
}

#[test]
fn ridge_simulation_matches_theory() {
    let t = 40;
    let sigma_u = build_covariance(&CovarianceSpec::ar1(0.4, t)).unwrap();
    let truth = GroundTruth::new(Matrix::from_fn(t, 1, |i, _| if i % 3 == 0 { 0.3 } else { -0.1 }), 0.5).unwrap();
    let (theory, _) = risk_ridge_spectral(&sigma_u, &truth, 0.2, 80, &SolverOptions::default()).unwrap();
    let mut cfg = McConfig::new(80, 0.2, 200, 9);
    cfg.conditional = true;
    let e = empirical_risk_mc(&sigma_u, &truth, &MapSource::Fixed(FeatureMap::Identity { dim: t }), &cfg).unwrap();
    let gap = (theory.total - e.mean).abs();
    assert!(gap <= (0.05 * theory.total).max(3.0 * e.std_error), "{} vs {}", theory.total, e.mean);
}

#[test]
fn monte_carlo_moments_match_closed_form() {
    let t = 6;
    let res = sample_reservoir(&ReservoirParams::linear(20, t, 0.7, 4)).unwrap();
    let map = FeatureMap::linear_esn(&res, t).unwrap();
    let sigma_u = build_covariance(&CovarianceSpec::ar1(0.3, t)).unwrap();
    let exact = moments_for_map(&sigma_u, &map).unwrap();
    let mc = moments_monte_carlo(&map, &sigma_u, 200_000, 8).unwrap();
    let rel = (&mc.sigma_z - &exact.sigma_z).norm() / exact.sigma_z.norm();
    assert!(rel < 0.02, "relative error {rel}");
    let rel = (&mc.sigma_uz - &exact.sigma_uz).norm() / exact.sigma_uz.norm();
    assert!(rel < 0.02, "relative error {rel}");
}

#[test]
fn resolvent_tends_to_scaled_identity() {
    let n = 20;
    let lambda = 1e4;
    let r = resolvent_mean(&FeatureMap::Identity { dim: n }, &Matrix::identity(n, n), 40, lambda, 10, 2).unwrap();
    let err = (&r.mean_q - Matrix::identity(n, n) / lambda).amax();
    assert!(err <= 10.0 / (lambda * lambda), "{err}");
}

fn ridge_base(t: usize, sigma: f64, theta_scale: f64) -> Scenario {
    let mut sim = SimSpec::new(2 * t, 0.5);
    sim.trials = 100;
    sim.conditional = true;
    Scenario {
        model: ModelSpec {
            t,
            sigma_u: CovarianceKind::Identity,
            theta: ThetaKind::UnitRows { seed: 2 },
            theta_scale,
            normalize_theta: false,
            q: 1,
            sigma,
        },
        map: MapSpec::identity(),
        sim,
        seed: 21,
    }
}

#[test]
fn ridge_gap_shrinks_with_size() {
    let spec = ConvergenceSpec {
        base: ridge_base(50, 0.5, 1.0),
        sizes: [(50, 100), (100, 200), (200, 400)]
            .map(|(t, n_samples)| Size { t, n: 0, n_samples })
            .to_vec(),
    };
    let table = convergence_study(&spec).unwrap();
    let gaps: Vec<f64> = table.rows.iter().map(|r| r.rel_gap).collect();
    // each size is either closer than the previous one or inside its own noise
    for (w, row) in gaps.windows(2).zip(&table.rows[1..]) {
        assert!(w[1] < w[0] || row.within_noise, "{gaps:?}");
    }
    assert!(gaps[2] < 0.02, "{gaps:?}");
}

#[test]
fn degenerate_scenario_has_no_gap() {
    let spec = ConvergenceSpec {
        base: ridge_base(10, 0.0, 0.0),
        sizes: vec![Size { t: 10, n: 0, n_samples: 20 }],
    };
    let table = convergence_study(&spec).unwrap();
    assert_eq!(table.rows[0].theory.total, 0.0);
    assert_eq!(table.rows[0].empirical.mean, 0.0);
    assert_eq!(table.rows[0].rel_gap, 0.0);
}
