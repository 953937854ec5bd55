//! TOML run configuration.
//!
//! ```toml
//! [model]
//! t = 50
//! sigma_u = { kind = "ar1", decay = 0.3 }
//! theta = { kind = "decay", rho = 0.8 }
//! normalize_theta = true
//! sigma = 0.3
//!
//! [map]
//! kind = "linear_esn"
//! n = 300
//! phi = 0.6
//!
//! [experiment]
//! n_samples = 100
//! lambda = 0.01
//! variable = "ratio_n_over_N"
//! grid = [0.5, 1.0, 2.0]
//!
//! [output]
//! dir = "out"
//! svg = true
//! ```
//!
//! Unknown keys are rejected. Errors carry the line of the offending key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::covariance::{CovarianceKind, ThetaKind};
use crate::experiments::{
    config_hash, ConvergenceSpec, MapKind, MapSpec, ModelSpec, PhaseSpec, Scenario, SimSpec, Size, StsSpec,
    SweepSpec, SweepVariable,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Risk,
    Simulate,
    Sweep,
    Phase,
    Validate,
}

impl std::str::FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "risk" => Ok(Command::Risk),
            "simulate" => Ok(Command::Simulate),
            "sweep" => Ok(Command::Sweep),
            "phase" => Ok(Command::Phase),
            "validate" => Ok(Command::Validate),
            other => Err(Error::Config(format!(
                "unknown command `{other}` (expected risk, simulate, sweep, phase or validate)"
            ))),
        }
    }
}

fn default_theta() -> ThetaKind {
    ThetaKind::UnitRows { seed: 0 }
}
fn default_identity() -> CovarianceKind {
    CovarianceKind::Identity
}
fn default_one() -> f64 {
    1.0
}
fn default_q() -> usize {
    1
}

/// `[model]` as written; `theta` and `sigma` may be omitted for `validate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub t: usize,
    #[serde(default = "default_identity")]
    pub sigma_u: CovarianceKind,
    #[serde(default = "default_theta")]
    pub theta: ThetaKind,
    #[serde(default = "default_one")]
    pub theta_scale: f64,
    #[serde(default)]
    pub normalize_theta: bool,
    #[serde(default = "default_q")]
    pub q: usize,
    #[serde(default)]
    pub sigma: f64,
}

/// `[experiment]`: training settings plus the knobs of each command.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub n_samples: Option<usize>,
    pub lambda: Option<f64>,
    pub trials: Option<usize>,
    pub test_size: Option<usize>,
    pub resample_map: Option<bool>,
    pub conditional: Option<bool>,
    /// Run simulations next to the theory in `sweep` and `phase`.
    pub empirical: Option<bool>,
    /// `sweep`
    pub variable: Option<SweepVariable>,
    pub grid: Option<Vec<f64>>,
    /// `phase`
    pub n_samples_grid: Option<Vec<usize>>,
    pub rho_grid: Option<Vec<f64>>,
    pub fixed_lambda: Option<f64>,
    /// `validate`: reservoir sizes and draws per size.
    pub n_grid: Option<Vec<usize>>,
    pub reps: Option<usize>,
    /// Optional convergence table for `validate`.
    pub sizes: Option<Vec<Size>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub svg: Option<bool>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub model: ModelSection,
    #[serde(default = "MapSpec::identity")]
    pub map: MapSpec,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Fully resolved run: file contents merged with command-line overrides.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub file: ConfigFile,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub emit_svg: bool,
    /// `None` lets the thread pool decide.
    pub threads: Option<usize>,
    #[serde(skip)]
    source: String,
    #[serde(skip)]
    path: String,
}

/// Command-line values that take precedence over `[output]`.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub svg: bool,
    pub threads: Option<usize>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key` inside `[section]`, if present.
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let header = format!("[{section}]");
    let mut inside = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            inside = line == header;
            continue;
        }
        if inside && line.split('=').next().map(str::trim) == Some(key) {
            return Some(i + 1);
        }
    }
    None
}

impl ConfigFile {
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(0);
            Error::Config(format!("{path}:{line}: {}", e.message().trim()))
        })
    }
}

impl RunConfig {
    pub fn from_text(command: Command, text: &str, path: &str, overrides: &Overrides) -> Result<Self> {
        let file = ConfigFile::parse(text, path)?;
        let cfg = RunConfig {
            command,
            output_dir: overrides
                .out
                .clone()
                .or_else(|| file.output.dir.clone())
                .unwrap_or_else(|| PathBuf::from("out")),
            seed: overrides.seed.or(file.output.seed).unwrap_or(0),
            emit_svg: overrides.svg || file.output.svg.unwrap_or(false),
            threads: overrides.threads.or(file.output.threads),
            file,
            source: text.to_owned(),
            path: path.to_owned(),
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(command: Command, path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: cannot read config: {e}", path.display())))?;
        Self::from_text(command, &text, &path.display().to_string(), overrides)
    }

    /// `path:line: section.key message`.
    fn invalid(&self, section: &str, key: &str, msg: &str) -> Error {
        let line = locate(&self.source, section, key).unwrap_or(0);
        Error::Config(format!("{}:{line}: {section}.{key} {msg}", self.path))
    }

    fn require<T: Clone>(&self, value: &Option<T>, key: &str) -> Result<T> {
        value
            .clone()
            .ok_or_else(|| self.invalid("experiment", key, "is required for this command"))
    }

    fn check(&self) -> Result<()> {
        let m = &self.file.model;
        let e = &self.file.experiment;
        if m.t == 0 {
            return Err(self.invalid("model", "t", "must be at least 1"));
        }
        if !(m.sigma >= 0.0) || !m.sigma.is_finite() {
            return Err(self.invalid("model", "sigma", "must be finite and nonnegative"));
        }
        if m.q == 0 {
            return Err(self.invalid("model", "q", "must be at least 1"));
        }
        let map = &self.file.map;
        if !(map.phi > 0.0 && map.phi < 1.0) {
            return Err(self.invalid("map", "phi", "must lie in (0, 1)"));
        }
        if map.kind != MapKind::Identity && map.n == 0 && self.command != Command::Validate {
            let ratio_sweep = self.command == Command::Sweep && e.variable == Some(SweepVariable::RatioNOverN);
            if !ratio_sweep {
                return Err(self.invalid("map", "n", "must be at least 1"));
            }
        }
        if let Some(v) = map.projection_variance {
            if !(v > 0.0) {
                return Err(self.invalid("map", "projection_variance", "must be positive"));
            }
        }
        if let Some(l) = e.lambda {
            if !(l > 0.0) || !l.is_finite() {
                return Err(self.invalid("experiment", "lambda", "must be positive"));
            }
        }
        if e.n_samples == Some(0) {
            return Err(self.invalid("experiment", "n_samples", "must be at least 1"));
        }
        if e.trials == Some(0) {
            return Err(self.invalid("experiment", "trials", "must be at least 1"));
        }
        if e.test_size == Some(0) {
            return Err(self.invalid("experiment", "test_size", "must be at least 1"));
        }
        if let Some(l) = e.fixed_lambda {
            if !(l > 0.0) {
                return Err(self.invalid("experiment", "fixed_lambda", "must be positive"));
            }
        }
        match self.command {
            Command::Risk | Command::Simulate => {
                self.require(&e.n_samples, "n_samples")?;
                self.require(&e.lambda, "lambda")?;
            }
            Command::Sweep => {
                self.require(&e.n_samples, "n_samples")?;
                self.require(&e.lambda, "lambda")?;
                self.require(&e.variable, "variable")?;
                let grid = self.require(&e.grid, "grid")?;
                if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(self.invalid("experiment", "grid", "must be nonempty and strictly increasing"));
                }
            }
            Command::Phase => {
                let ns = self.require(&e.n_samples_grid, "n_samples_grid")?;
                let rhos = self.require(&e.rho_grid, "rho_grid")?;
                if ns.is_empty() || ns.contains(&0) {
                    return Err(self.invalid("experiment", "n_samples_grid", "must be nonempty and positive"));
                }
                if rhos.is_empty() || rhos.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
                    return Err(self.invalid("experiment", "rho_grid", "must be nonempty with entries in (0, 1]"));
                }
                if m.q != 1 {
                    return Err(self.invalid("model", "q", "must be 1 for the phase diagram"));
                }
                if !matches!(map.kind, MapKind::LinearEsn | MapKind::Esn) {
                    return Err(self.invalid("map", "kind", "must be a reservoir for the phase diagram"));
                }
            }
            Command::Validate => {
                if m.t > 20 {
                    return Err(self.invalid("model", "t", "must be at most 20 for validate"));
                }
                let ns = self.require(&e.n_grid, "n_grid")?;
                if ns.is_empty() || ns.contains(&0) || ns.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(self.invalid("experiment", "n_grid", "must be nonempty and strictly increasing"));
                }
                if e.reps == Some(0) {
                    return Err(self.invalid("experiment", "reps", "must be at least 1"));
                }
            }
        }
        Ok(())
    }

    /// Hash of the command, the scenario sections and the seed. Output
    /// location, plotting and thread count do not enter.
    pub fn hash(&self) -> String {
        let mut file = self.file.clone();
        file.output = OutputSection::default();
        config_hash(&(self.command, file, self.seed))
    }

    /// Resolved configuration as TOML, for the echo file.
    pub fn echo(&self) -> String {
        let mut text = format!("# config-hash: {}\n# command: {:?}\n", self.hash(), self.command).to_lowercase();
        text.push_str(&format!("# seed: {}\n", self.seed));
        let mut file = self.file.clone();
        file.output.seed = Some(self.seed);
        file.output.dir = Some(self.output_dir.clone());
        file.output.svg = Some(self.emit_svg);
        file.output.threads = None;
        text.push_str(&toml::to_string(&file).unwrap_or_default());
        text
    }

    pub fn model(&self) -> ModelSpec {
        let m = &self.file.model;
        ModelSpec {
            t: m.t,
            sigma_u: m.sigma_u.clone(),
            theta: m.theta.clone(),
            theta_scale: m.theta_scale,
            normalize_theta: m.normalize_theta,
            q: m.q,
            sigma: m.sigma,
        }
    }

    pub fn scenario(&self) -> Scenario {
        let e = &self.file.experiment;
        let mut sim = SimSpec::new(e.n_samples.unwrap_or(1), e.lambda.unwrap_or(1.0));
        if let Some(v) = e.trials {
            sim.trials = v;
        }
        if let Some(v) = e.test_size {
            sim.test_size = v;
        }
        if let Some(v) = e.resample_map {
            sim.resample_map = v;
        }
        if let Some(v) = e.conditional {
            sim.conditional = v;
        }
        Scenario {
            model: self.model(),
            map: self.file.map.clone(),
            sim,
            seed: self.seed,
        }
    }

    pub fn empirical(&self) -> bool {
        self.file.experiment.empirical.unwrap_or(true)
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let e = &self.file.experiment;
        SweepSpec::new(
            self.require(&e.variable, "variable")?,
            self.require(&e.grid, "grid")?,
            self.scenario(),
        )
    }

    pub fn phase_spec(&self) -> Result<PhaseSpec> {
        let e = &self.file.experiment;
        Ok(PhaseSpec {
            n_grid: self.require(&e.n_samples_grid, "n_samples_grid")?,
            rho_grid: self.require(&e.rho_grid, "rho_grid")?,
            base: self.scenario(),
            fixed_lambda: e.fixed_lambda,
            empirical: self.empirical(),
        })
    }

    pub fn sts_spec(&self) -> Result<StsSpec> {
        let e = &self.file.experiment;
        Ok(StsSpec {
            t: self.file.model.t,
            phi: self.file.map.phi,
            n_grid: self.require(&e.n_grid, "n_grid")?,
            reps: e.reps.unwrap_or(200),
            seed: self.seed,
            normalization: self.file.map.normalization,
        })
    }

    pub fn convergence_spec(&self) -> Option<ConvergenceSpec> {
        self.file.experiment.sizes.clone().map(|sizes| ConvergenceSpec {
            base: self.scenario(),
            sizes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RISK: &str = "[model]\nt = 10\nsigma = 1.0\ntheta = { kind = \"decay\", rho = 0.5 }\n\n[experiment]\nn_samples = 10\nlambda = 1.0\n";

    #[test]
    fn parses_minimal_risk_config() {
        let cfg = RunConfig::from_text(Command::Risk, RISK, "a.toml", &Overrides::default()).unwrap();
        assert_eq!(cfg.scenario().sim.n_samples, 10);
        assert_eq!(cfg.file.map.kind, MapKind::Identity);
        assert_eq!(cfg.hash(), cfg.clone().hash());
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let text = RISK.replace("lambda = 1.0", "lambda = 1.0\nlamda = 2.0");
        let err = RunConfig::from_text(Command::Risk, &text, "a.toml", &Overrides::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("lamda"), "{msg}");
        assert!(msg.contains("a.toml:9"), "{msg}");
    }

    #[test]
    fn invalid_value_names_key_and_line() {
        let text = RISK.replace("lambda = 1.0", "lambda = -1.0");
        let msg = RunConfig::from_text(Command::Risk, &text, "a.toml", &Overrides::default())
            .unwrap_err()
            .to_string();
        assert!(msg.contains("a.toml:8: experiment.lambda"), "{msg}");
    }

    #[test]
    fn missing_sweep_grid() {
        let msg = RunConfig::from_text(Command::Sweep, RISK, "a.toml", &Overrides::default())
            .unwrap_err()
            .to_string();
        assert!(msg.contains("experiment.variable"), "{msg}");
    }

    #[test]
    fn overrides_win() {
        let o = Overrides {
            seed: Some(9),
            out: Some("x".into()),
            svg: true,
            threads: Some(2),
        };
        let cfg = RunConfig::from_text(Command::Risk, RISK, "a.toml", &o).unwrap();
        assert_eq!((cfg.seed, cfg.emit_svg, cfg.threads), (9, true, Some(2)));
        assert!(cfg.echo().starts_with("# config-hash: "));
    }
}
