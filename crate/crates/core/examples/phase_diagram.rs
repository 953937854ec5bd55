//! Which readout wins, reservoir or plain ridge, over sample size and the
//! memory length of the target. Each side uses its own best lambda.
//!
//! cargo run --release --example phase_diagram

use rmt_repr::experiments::{phase_defaults, phase_diagram, Winner};

fn main() -> rmt_repr::Result<()> {
    let p = phase_diagram(&phase_defaults(3))?;
    let mark = |w: Winner| if w == Winner::Esn { 'E' } else { 'R' };

    println!("theory (E = reservoir, R = ridge), rows N, columns rho");
    print!("{:>6}", "");
    for rho in &p.rho_grid {
        print!("{rho:>6}");
    }
    println!();
    for (i, n) in p.n_grid.iter().enumerate() {
        print!("{n:>6}");
        for j in 0..p.rho_grid.len() {
            let c = p.cell(i, j);
            let flag = match c.empirical_winner {
                Some(w) if c.decisive && w != c.theory_winner => '!',
                _ => ' ',
            };
            print!("{:>5}{flag}", mark(c.theory_winner));
        }
        println!();
    }
    let (agree, decisive) = p.agreement();
    println!("\nsimulation agrees on {agree} of {decisive} decisive cells (! marks disagreement)");
    for f in &p.theory_frontier {
        println!("frontier at N = {}: rho = {:.3}", f.n_samples, f.rho);
    }
    Ok(())
}
