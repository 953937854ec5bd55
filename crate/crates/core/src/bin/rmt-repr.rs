use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use rmt_repr::cli::{exit_code, run, EXIT_CONFIG};
use rmt_repr::config::{Command, Overrides, RunConfig};

/// Asymptotic and simulated risk of ridge readouts on fixed representations.
#[derive(Parser, Debug)]
#[command(name = "rmt-repr", version)]
struct Args {
    /// risk | simulate | sweep | phase | validate
    command: String,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: bool,
    /// Worker threads; RMT_REPR_THREADS takes precedence.
    #[arg(long)]
    threads: Option<usize>,
}

fn threads_from_env() -> Result<Option<usize>, String> {
    match std::env::var("RMT_REPR_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| format!("RMT_REPR_THREADS must be a positive integer, got `{v}`")),
        _ => Ok(None),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();

    let fail = |code: i32, msg: String| {
        eprintln!("rmt-repr: {msg}");
        ExitCode::from(code as u8)
    };

    let command: Command = match args.command.parse() {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e.to_string()),
    };
    let env_threads = match threads_from_env() {
        Ok(t) => t,
        Err(msg) => return fail(EXIT_CONFIG, msg),
    };
    let overrides = Overrides {
        seed: args.seed,
        out: args.out,
        svg: args.svg,
        threads: env_threads.or(args.threads),
    };
    let config = match RunConfig::load(command, &args.config, &overrides) {
        Ok(c) => c,
        Err(e) => return fail(exit_code(&e), e.to_string()),
    };
    if let Some(k) = config.threads.filter(|&k| k > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }

    match run(&config, &mut std::io::stdout()) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => fail(exit_code(&e), format!("{} failed: {e}", args.command)),
    }
}
