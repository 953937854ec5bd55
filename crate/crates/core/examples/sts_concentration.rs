//! S^T S for a normalized linear reservoir concentrates on diag(phi^(i-T)).
//!
//! cargo run --release --example sts_concentration

use rmt_repr::experiments::{sts_concentration_study, StsSpec};
use rmt_repr::representation::RadiusNormalization;

fn main() -> rmt_repr::Result<()> {
    let study = sts_concentration_study(&StsSpec {
        t: 4,
        phi: 0.6,
        n_grid: vec![100, 200, 400, 800, 1600],
        reps: 100,
        seed: 9,
        normalization: RadiusNormalization::Asymptotic,
    })?;
    println!("limit diagonal {:?}", study.limit);
    for row in &study.rows {
        let diag: Vec<String> = (0..row.mean_sts.nrows()).map(|i| format!("{:.3}", row.mean_sts[(i, i)])).collect();
        println!("n = {:>5}  deviation {:.4}  mean diag [{}]", row.n, row.deviation, diag.join(", "));
    }
    println!("log-log slope of deviation against n: {:.3}", study.slope);
    Ok(())
}
