//! End-to-end runs of the `rmt-repr` binary.

use std::path::Path;
use std::process::{Command, Output};

fn rmt(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmt-repr"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env_remove("RMT_REPR_THREADS")
        .output()
        .unwrap()
}

fn example(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs").join(name)
}

#[test]
fn risk_prints_the_null_breakdown() {
    let tmp = tempfile::tempdir().unwrap();
    let o = rmt(&["risk"], &example("risk_null.toml"), tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("total = 1.17082039325"), "{stdout}");
    let csv = std::fs::read_to_string(tmp.path().join("risk.csv")).unwrap();
    assert!(csv.starts_with("# config-hash: "));
    assert!(tmp.path().join("config.echo.toml").exists());
}

#[test]
fn unknown_key_exits_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[model]\nt = 5\nbogus = 1\n").unwrap();
    let o = rmt(&["risk"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("bogus") && err.contains(":3:"), "{err}");
}

#[test]
fn out_of_range_value_names_its_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[model]\nt = 5\n\n[experiment]\nn_samples = 10\nlambda = -1.0\n").unwrap();
    let o = rmt(&["risk"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("lambda"), "{err}");
}

#[test]
fn interpolation_at_tiny_lambda_is_a_numerical_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("edge.toml");
    std::fs::write(&cfg, "[model]\nt = 20\nsigma = 0.5\n\n[experiment]\nn_samples = 20\nlambda = 1e-14\n").unwrap();
    let o = rmt(&["risk"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn validate_reports_the_time_weights() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("sts.toml");
    std::fs::write(
        &cfg,
        "[model]\nt = 3\n\n[map]\nkind = \"linear_esn\"\nphi = 0.5\n\n[experiment]\nn_grid = [100, 400]\nreps = 20\n",
    )
    .unwrap();
    let o = rmt(&["validate", "--svg"], &cfg, tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("sts.csv")).unwrap();
    let header: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let row: Vec<&str> = csv.lines().nth(2).unwrap().split(',').collect();
    for (i, want) in ["4", "2", "1"].iter().enumerate() {
        let col = header.iter().position(|h| *h == format!("limit_diag_{}", i + 1)).unwrap();
        assert_eq!(row[col], *want);
    }
    assert!(tmp.path().join("sts.svg").exists());
}

#[test]
fn seed_flag_changes_simulation_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("sim.toml");
    std::fs::write(&cfg, "[model]\nt = 8\nsigma = 0.5\n\n[experiment]\nn_samples = 16\nlambda = 0.1\ntrials = 10\ntest_size = 50\n").unwrap();
    let read = |seed: &str, dir: &str| {
        let out = tmp.path().join(dir);
        assert!(rmt(&["simulate", "--seed", seed], &cfg, &out).status.success());
        std::fs::read_to_string(out.join("trials.csv")).unwrap()
    };
    assert_eq!(read("1", "a"), read("1", "b"));
    assert_ne!(read("1", "a"), read("2", "c"));
}
