//! Gap between theory and simulation as all dimensions grow together.
//!
//! cargo run --release --example convergence

use rmt_repr::covariance::{CovarianceKind, ThetaKind};
use rmt_repr::experiments::{convergence_study, ConvergenceSpec, MapSpec, ModelSpec, Scenario, SimSpec, Size};

fn main() -> rmt_repr::Result<()> {
    let mut sim = SimSpec::new(0, 0.2);
    sim.trials = 100;
    sim.conditional = true;
    let base = Scenario {
        model: ModelSpec {
            t: 10,
            sigma_u: CovarianceKind::Identity,
            theta: ThetaKind::UnitRows { seed: 6 },
            theta_scale: 1.0,
            normalize_theta: false,
            q: 1,
            sigma: 0.5,
        },
        map: MapSpec::linear_esn(0, 0.8),
        sim,
        seed: 12,
    };
    let sizes = [(10, 50, 25), (10, 100, 50), (10, 200, 100), (10, 400, 200)]
        .map(|(t, n, n_samples)| Size { t, n, n_samples })
        .to_vec();
    let table = convergence_study(&ConvergenceSpec { base, sizes })?;
    println!("{:>4} {:>5} {:>5} {:>10} {:>20} {:>8}", "T", "n", "N", "theory", "simulation", "gap");
    for r in &table.rows {
        println!(
            "{:>4} {:>5} {:>5} {:>10.5} {:>10.5} +- {:<7.5} {:>7.2}%",
            r.size.t, r.size.n, r.size.n_samples, r.theory.total, r.empirical.mean, r.empirical.std_error, 100.0 * r.rel_gap
        );
    }
    Ok(())
}
