//! Asymptotic risk of a ridge readout on raw inputs versus on a linear echo
//! state network, across the regularization strength.
//!
//! cargo run --release --example theory_risk

use rmt_repr::covariance::{build_covariance, generate_theta, CovarianceSpec, GroundTruth, ThetaKind};
use rmt_repr::rmt::{log_grid, risk_esn_spectral, risk_ridge_spectral, SolverOptions};

fn main() -> rmt_repr::Result<()> {
    let (t, n_samples) = (40, 60);
    let sigma_u = build_covariance(&CovarianceSpec::ar1(0.5, t))?;
    // weights concentrated on recent inputs favour the reservoir
    let theta = generate_theta(&ThetaKind::Decay { rho: 0.7 }, t, 1, 1.0)?;
    let truth = GroundTruth::new(theta, 0.3)?;
    let opts = SolverOptions::default();

    println!("{:>10} {:>12} {:>12} {:>8}", "lambda", "ridge", "esn(0.8)", "alpha");
    for lambda in log_grid(1e-3, 1e2, 11) {
        let (ridge, sol) = risk_ridge_spectral(&sigma_u, &truth, lambda, n_samples, &opts)?;
        let (esn, _) = risk_esn_spectral(&sigma_u, &truth, 0.8, lambda, n_samples, &opts)?;
        println!("{lambda:>10.3e} {:>12.6} {:>12.6} {:>8.4}", ridge.total, esn.total, sol.alpha);
    }
    let (r, _) = risk_ridge_spectral(&sigma_u, &truth, 1.0, n_samples, &opts)?;
    println!("\nridge at lambda = 1: bias^2 {:.5}, variance {:.5}, noise {:.5}", r.bias_sq, r.variance, r.noise);
    Ok(())
}
