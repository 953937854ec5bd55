//! The same task through different representations, including a tanh
//! reservoir whose moments are estimated by sampling.
//!
//! cargo run --release --example feature_maps

use rmt_repr::covariance::{CovarianceKind, ThetaKind};
use rmt_repr::experiments::{MapKind, MapSpec, ModelSpec, Scenario, SimSpec};
use rmt_repr::rmt::SolverOptions;

fn main() -> rmt_repr::Result<()> {
    let model = ModelSpec {
        t: 15,
        sigma_u: CovarianceKind::Ar1 { decay: 0.5 },
        theta: ThetaKind::Decay { rho: 0.7 },
        theta_scale: 1.0,
        normalize_theta: true,
        q: 1,
        sigma: 0.2,
    };
    let tanh = MapSpec { kind: MapKind::Esn, ..MapSpec::linear_esn(120, 0.7) };
    let maps = [
        ("identity", MapSpec::identity()),
        ("projection", MapSpec::random_projection(120)),
        ("linear esn", MapSpec::linear_esn(120, 0.7)),
        ("tanh esn", tanh),
    ];
    let mut sim = SimSpec::new(60, 0.05);
    sim.trials = 60;
    sim.resample_map = false;
    println!("{:>12} {:>10} {:>20}", "map", "theory", "simulation");
    for (name, map) in maps {
        let s = Scenario { model: model.clone(), map, sim: sim.clone(), seed: 8 };
        let (theory, _) = s.theory(&SolverOptions::default())?;
        let e = s.empirical()?;
        println!("{name:>12} {:>10.5} {:>10.5} +- {:.5}", theory.total, e.mean, e.std_error);
    }
    Ok(())
}
