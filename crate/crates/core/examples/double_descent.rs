//! Risk against n/N near the interpolation threshold: a random projection
//! peaks there, a linear reservoir does not.
//!
//! cargo run --release --example double_descent [out_dir]
//! With an output directory the curves are also written as CSV and SVG.

use rmt_repr::experiments::{double_descent_defaults, double_descent_sweep, DEFAULT_RATIO_GRID};
use rmt_repr::output::{line_chart, sweep_table, write_file, Series};

fn main() -> rmt_repr::Result<()> {
    let (projection, esn) = double_descent_defaults(1);
    let curves = double_descent_sweep(&DEFAULT_RATIO_GRID, &[projection, esn], 1e-4, true)?;

    for c in &curves {
        println!("{}", c.label);
        println!("{:>6} {:>5} {:>12} {:>18} {:>8}", "n/N", "n", "theory", "simulation", "alpha");
        for p in &c.points {
            let e = p.empirical.as_ref().expect("simulated");
            let th = p.theory.map_or("inf".to_string(), |r| format!("{:.4}", r.total));
            let alpha = p.alpha.map_or("-".to_string(), |a| format!("{a:.4}"));
            println!("{:>6} {:>5} {th:>12} {:>10.4} +- {:<5.3} {alpha:>8}{}", p.x, p.n, e.mean, e.std_error, if p.flagged { " *" } else { "" });
        }
        println!();
    }

    if let Some(dir) = std::env::args().nth(1) {
        let dir = std::path::Path::new(&dir);
        let mut series = Vec::new();
        for c in &curves {
            write_file(dir, &format!("{}.csv", c.label), &sweep_table(c).render(&c.config_hash))?;
            let pts = c.points.iter().map(|p| (p.x, p.empirical.as_ref().map_or(f64::NAN, |e| e.mean))).collect();
            series.push(Series { name: c.label.clone(), points: pts });
        }
        write_file(dir, "double_descent.svg", &line_chart("double descent", "n/N", "risk", &series, true, &curves[0].config_hash))?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}
