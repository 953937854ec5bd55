//! Averages of the resolvent and of Q Sz Q against their deterministic
//! equivalents for growing dimension.
//!
//! cargo run --release --example deterministic_equivalents

use rmt_repr::empirical::resolvent_mean;
use rmt_repr::representation::FeatureMap;
use rmt_repr::rmt::{second_order_equivalent, solve_delta_matrix, SolverOptions};
use rmt_repr::Matrix;

fn op_norm(m: &Matrix) -> f64 {
    ((m + m.transpose()) * 0.5).symmetric_eigenvalues().amax()
}

fn main() -> rmt_repr::Result<()> {
    let lambda = 1.0;
    println!("{:>5} {:>5} {:>12} {:>12}", "n", "reps", "first", "second");
    for n in [50, 100, 200, 400] {
        let reps = n / 4;
        let sigma = Matrix::identity(n, n);
        let r = resolvent_mean(&FeatureMap::Identity { dim: n }, &sigma, 2 * n, lambda, reps, 5)?;
        let sol = solve_delta_matrix(&r.sigma_z, lambda, 2 * n, &SolverOptions::default())?;
        let qbar = sol.qbar().expect("matrix solver keeps Q bar");
        let first = op_norm(&(&r.mean_q - qbar));
        let second = op_norm(&(&r.mean_q_sz_q - second_order_equivalent(&r.sigma_z, &sol)?));
        println!("{n:>5} {reps:>5} {first:>12.5} {second:>12.5}");
    }
    Ok(())
}
