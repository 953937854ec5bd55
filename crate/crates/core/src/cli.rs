//! Command dispatch for the `rmt-repr` binary.

use std::io::Write;

use crate::config::{Command, RunConfig};
use crate::experiments::{convergence_study, phase_diagram, run_sweep, sts_concentration_study, SweepVariable};
use crate::output::{self, fmt_num, line_chart, CsvTable, Series};
use crate::rmt::SolverOptions;
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Io(_) => EXIT_IO,
        _ => EXIT_NUMERICAL,
    }
}

/// Runs one command, writing artifacts under `config.output_dir` and a short
/// report to `out`. Returns the names of the files written.
pub fn run(config: &RunConfig, out: &mut dyn Write) -> Result<Vec<String>> {
    let hash = config.hash();
    let dir = &config.output_dir;
    let mut written = Vec::new();
    let mut emit = |name: &str, text: String| -> Result<()> {
        output::write_file(dir, name, &text)?;
        written.push(name.to_string());
        Ok(())
    };
    emit("config.echo.toml", config.echo())?;

    match config.command {
        Command::Risk => {
            let scenario = config.scenario();
            let (r, sol) = scenario.theory(&SolverOptions::default())?;
            writeln!(
                out,
                "bias^2 = {}\nvariance = {}\nnoise = {}\ntotal = {}\nalpha = {}\ndelta = {}\nkappa = {}",
                fmt_num(r.bias_sq),
                fmt_num(r.variance),
                fmt_num(r.noise),
                fmt_num(r.total),
                fmt_num(sol.alpha),
                fmt_num(sol.delta),
                fmt_num(sol.kappa)
            )?;
            let mut t = CsvTable::new(["bias_sq", "variance", "noise", "total", "alpha", "delta", "kappa"]);
            t.push(
                [r.bias_sq, r.variance, r.noise, r.total, sol.alpha, sol.delta, sol.kappa]
                    .map(fmt_num)
                    .to_vec(),
            );
            emit("risk.csv", t.render(&hash))?;
        }
        Command::Simulate => {
            let scenario = config.scenario();
            let theory = match scenario.theory(&SolverOptions::default()) {
                Ok((r, _)) => r.total,
                Err(Error::AlphaAtOne { .. }) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            let e = scenario.empirical()?;
            writeln!(
                out,
                "theory = {}\nempirical = {} +- {} ({} trials)",
                fmt_num(theory),
                fmt_num(e.mean),
                fmt_num(e.std_error),
                e.trials
            )?;
            let mut t = CsvTable::new(["theory_total", "empirical_mean", "empirical_std_error", "trials"]);
            t.push(vec![fmt_num(theory), fmt_num(e.mean), fmt_num(e.std_error), e.trials.to_string()]);
            emit("simulate.csv", t.render(&hash))?;
            let mut per = CsvTable::new(["trial", "risk"]);
            for (k, v) in e.per_trial.iter().enumerate() {
                per.push(vec![k.to_string(), fmt_num(*v)]);
            }
            emit("trials.csv", per.render(&hash))?;
        }
        Command::Sweep => {
            let spec = config.sweep_spec()?;
            let g = run_sweep(&spec, config.empirical())?;
            let table = output::sweep_table(&g);
            writeln!(out, "{} points, {} flagged", g.points.len(), g.points.iter().filter(|p| p.flagged).count())?;
            emit("sweep.csv", table.render(&hash))?;
            if config.emit_svg {
                let theory = g.points.iter().map(|p| (p.x, p.theory.map_or(f64::INFINITY, |r| r.total)));
                let mut series = vec![Series {
                    name: "theory".into(),
                    points: theory.collect(),
                }];
                if config.empirical() {
                    series.push(Series {
                        name: "empirical".into(),
                        points: g
                            .points
                            .iter()
                            .filter_map(|p| Some((p.x, p.empirical.as_ref()?.mean)))
                            .collect(),
                    });
                }
                let log_x = spec.variable == SweepVariable::Lambda;
                let label = if log_x {
                    "log10 lambda".to_string()
                } else {
                    spec.variable.name().to_string()
                };
                if log_x {
                    for s in &mut series {
                        for p in &mut s.points {
                            p.0 = p.0.log10();
                        }
                    }
                }
                emit("sweep.svg", line_chart(&g.label, &label, "risk", &series, true, &hash))?;
            }
        }
        Command::Phase => {
            let spec = config.phase_spec()?;
            let p = phase_diagram(&spec)?;
            let (agree, decisive) = p.agreement();
            writeln!(
                out,
                "{} cells; theory/empirical winners agree on {agree} of {decisive} decisive cells",
                p.cells.len()
            )?;
            emit("phase.csv", output::phase_table(&p).render(&hash))?;
            emit("frontier.csv", output::frontier_table(&p).render(&hash))?;
            if config.emit_svg {
                let series: Vec<Series> = p
                    .n_grid
                    .iter()
                    .enumerate()
                    .map(|(i, n)| Series {
                        name: format!("N = {n}"),
                        points: (0..p.rho_grid.len())
                            .map(|j| {
                                let c = p.cell(i, j);
                                (c.rho, c.esn.theory.total - c.ridge.theory.total)
                            })
                            .collect(),
                    })
                    .collect();
                emit(
                    "phase.svg",
                    line_chart("ESN minus ridge risk (theory)", "rho", "risk gap", &series, false, &hash),
                )?;
            }
        }
        Command::Validate => {
            let s = sts_concentration_study(&config.sts_spec()?)?;
            let last = s.rows.last().expect("n_grid is nonempty");
            writeln!(
                out,
                "limit diag = [{}]; deviation at n = {}: {}; slope = {}",
                s.limit.iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(", "),
                last.n,
                fmt_num(last.deviation),
                fmt_num(s.slope)
            )?;
            emit("sts.csv", output::sts_table(&s).render(&hash))?;
            emit("sts_fit.csv", output::sts_fit_table(&s).render(&hash))?;
            if let Some(spec) = config.convergence_spec() {
                let c = convergence_study(&spec)?;
                emit("convergence.csv", output::convergence_table(&c).render(&hash))?;
            }
            if config.emit_svg {
                let series = vec![Series {
                    name: "deviation".into(),
                    points: s.rows.iter().map(|r| ((r.n as f64).log10(), r.deviation)).collect(),
                }];
                emit(
                    "sts.svg",
                    line_chart("S^T S concentration", "log10 n", "max deviation", &series, true, &hash),
                )?;
            }
        }
    }
    Ok(written)
}
