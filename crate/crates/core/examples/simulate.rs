//! Theory against Monte Carlo for a linear echo state network whose
//! reservoir is redrawn in every trial.
//!
//! cargo run --release --example simulate

use rmt_repr::covariance::{CovarianceKind, ThetaKind};
use rmt_repr::experiments::{MapSpec, ModelSpec, Scenario, SimSpec};
use rmt_repr::rmt::SolverOptions;

fn main() -> rmt_repr::Result<()> {
    let mut sim = SimSpec::new(200, 0.1);
    sim.trials = 100;
    let scenario = Scenario {
        model: ModelSpec {
            t: 20,
            sigma_u: CovarianceKind::Ar1 { decay: 0.3 },
            theta: ThetaKind::UnitRows { seed: 1 },
            theta_scale: 1.0,
            normalize_theta: false,
            q: 1,
            sigma: 0.5,
        },
        map: MapSpec::linear_esn(400, 0.7),
        sim,
        seed: 2024,
    };
    let (theory, sol) = scenario.theory(&SolverOptions::default())?;
    let e = scenario.empirical()?;
    println!("theory     {:.5}  (delta {:.4}, alpha {:.4})", theory.total, sol.delta, sol.alpha);
    println!("simulation {:.5} +- {:.5} over {} trials", e.mean, e.std_error, e.trials);
    println!("gap        {:.2}%", 100.0 * (e.mean - theory.total).abs() / theory.total);
    Ok(())
}
