//! Best regularization from the asymptotic risk, and how the isotropic
//! optimum relates to the signal-to-noise ratio.
//!
//! cargo run --release --example optimal_lambda

use rmt_repr::covariance::{generate_theta, GroundTruth, ThetaKind};
use rmt_repr::experiments::{MapSpec, ModelSpec, Scenario, SimSpec};
use rmt_repr::rmt::{lambda_orientation_report, SolverOptions};

fn main() -> rmt_repr::Result<()> {
    for (t, n_samples, scale, sigma) in [(100, 200, 2.0, 1.0), (100, 50, 1.0, 1.0), (50, 400, 1.0, 2.0)] {
        let truth = GroundTruth::new(generate_theta(&ThetaKind::UnitRows { seed: 4 }, t, 1, scale)?, sigma)?;
        let o = lambda_orientation_report(&truth, n_samples)?;
        println!(
            "T = {t}, N = {n_samples}, SNR = {:.2}: lambda* = {:.5}, (T/N)/SNR = {:.5}, (T/N)*SNR = {:.5}",
            o.snr, o.lambda_star, o.inverse_snr_form, o.snr_form
        );
    }

    let scenario = Scenario {
        model: ModelSpec {
            t: 30,
            sigma_u: rmt_repr::covariance::CovarianceKind::Identity,
            theta: ThetaKind::Decay { rho: 0.8 },
            theta_scale: 1.0,
            normalize_theta: true,
            q: 1,
            sigma: 0.3,
        },
        map: MapSpec::linear_esn(200, 0.7),
        sim: SimSpec::new(40, 1.0),
        seed: 1,
    };
    let model = scenario.theory_model()?;
    for n_samples in [10, 40, 160] {
        let s = model.optimal_lambda(n_samples, &SolverOptions::default())?;
        println!("reservoir, N = {n_samples}: lambda* = {:.4e}, risk {:.5}", s.lambda, s.risk);
    }
    Ok(())
}
