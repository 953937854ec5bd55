//! Studies assembled from the theory and the simulator: one-parameter sweeps
//! (double descent among them), the ESN-versus-ridge phase diagram, the
//! concentration of `S^T S` and theory-versus-simulation convergence.
//!
//! Grid points are independent: point `i` works from seed
//! `derive(seed, i)` and results are gathered in grid order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{build_covariance, generate_theta, CovarianceKind, CovarianceSpec, GroundTruth, ThetaKind};
use crate::empirical::{empirical_risk_mc, EmpiricalRisk, MapSource, McConfig};
use crate::moments::{moments_for_map, moments_monte_carlo};
use crate::representation::{sample_reservoir, Activation, RadiusNormalization, ReservoirParams};
use crate::rmt::{
    esn_spectrum, lambda_range_for, moment_spectrum, optimal_lambda, rank_effective, ridge_spectrum,
    risk_moment_spectrum, spectral_risk, MomentSpectrum, RiskBreakdown, SelfConsistentSolution, SolverOptions,
    WeightedSpectrum, DEFAULT_RANK_THRESHOLD,
};
use crate::{rng, Error, Matrix, Result};

/// Samples used for Monte Carlo moments of nonlinear maps.
pub const NONLINEAR_MOMENT_SAMPLES: usize = 20_000;

fn default_identity() -> CovarianceKind {
    CovarianceKind::Identity
}
fn default_one() -> f64 {
    1.0
}
fn default_q() -> usize {
    1
}

/// Input law and teacher.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// Input length `T`.
    pub t: usize,
    #[serde(default = "default_identity")]
    pub sigma_u: CovarianceKind,
    pub theta: ThetaKind,
    #[serde(default = "default_one")]
    pub theta_scale: f64,
    /// Rescale every column of `Theta*` to norm `theta_scale`.
    #[serde(default)]
    pub normalize_theta: bool,
    #[serde(default = "default_q")]
    pub q: usize,
    /// Noise standard deviation.
    pub sigma: f64,
}

impl ModelSpec {
    pub fn sigma_u_matrix(&self) -> Result<Matrix> {
        build_covariance(&CovarianceSpec {
            kind: self.sigma_u.clone(),
            dim: self.t,
        })
    }

    pub fn truth(&self) -> Result<GroundTruth> {
        let mut theta = generate_theta(&self.theta, self.t, self.q, 1.0)?;
        if self.normalize_theta {
            for mut col in theta.column_iter_mut() {
                let norm = col.norm();
                if norm > 0.0 {
                    col /= norm;
                }
            }
        }
        GroundTruth::new(theta * self.theta_scale, self.sigma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Identity,
    RandomProjection,
    LinearEsn,
    /// Reservoir with a nonlinear activation.
    Esn,
}

fn default_phi() -> f64 {
    0.5
}
fn default_activation() -> Activation {
    Activation::Tanh
}
fn default_normalization() -> RadiusNormalization {
    RadiusNormalization::Asymptotic
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub kind: MapKind,
    /// Feature count; ignored by the identity map.
    #[serde(default)]
    pub n: usize,
    #[serde(default = "default_phi")]
    pub phi: f64,
    /// Only used by `kind = "esn"`.
    #[serde(default = "default_activation")]
    pub activation: Activation,
    #[serde(default = "default_normalization")]
    pub normalization: RadiusNormalization,
    /// Entry variance of random projections, `1/T` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection_variance: Option<f64>,
}

impl MapKind {
    pub fn name(self) -> &'static str {
        match self {
            MapKind::Identity => "identity",
            MapKind::RandomProjection => "random_projection",
            MapKind::LinearEsn => "linear_esn",
            MapKind::Esn => "esn",
        }
    }
}

impl MapSpec {
    pub fn identity() -> Self {
        Self {
            kind: MapKind::Identity,
            n: 0,
            phi: default_phi(),
            activation: default_activation(),
            normalization: default_normalization(),
            projection_variance: None,
        }
    }

    pub fn random_projection(n: usize) -> Self {
        Self {
            kind: MapKind::RandomProjection,
            n,
            ..Self::identity()
        }
    }

    pub fn linear_esn(n: usize, phi: f64) -> Self {
        Self {
            kind: MapKind::LinearEsn,
            n,
            phi,
            ..Self::identity()
        }
    }
}

fn default_trials() -> usize {
    200
}
fn default_test_size() -> usize {
    2000
}
fn default_true() -> bool {
    true
}

/// Training and simulation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    /// Training sample size `N`.
    pub n_samples: usize,
    pub lambda: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_test_size")]
    pub test_size: usize,
    #[serde(default = "default_true")]
    pub resample_map: bool,
    #[serde(default)]
    pub conditional: bool,
}

impl SimSpec {
    pub fn new(n_samples: usize, lambda: f64) -> Self {
        Self {
            n_samples,
            lambda,
            trials: default_trials(),
            test_size: default_test_size(),
            resample_map: true,
            conditional: false,
        }
    }
}

/// One fully specified setting: data model, representation, training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub model: ModelSpec,
    pub map: MapSpec,
    pub sim: SimSpec,
    pub seed: u64,
}

/// Risk as a function of `(lambda, N)` for a fixed scenario, prepared once.
#[derive(Debug, Clone)]
pub enum TheoryModel {
    Spectral { spectrum: WeightedSpectrum, noise: f64 },
    Moments(MomentSpectrum),
}

impl TheoryModel {
    pub fn risk(&self, lambda: f64, n_samples: usize, opts: &SolverOptions) -> Result<(RiskBreakdown, SelfConsistentSolution)> {
        match self {
            TheoryModel::Spectral { spectrum, noise } => {
                spectral_risk(&spectrum.mu, &spectrum.weights, *noise, lambda, n_samples, opts)
            }
            TheoryModel::Moments(ms) => risk_moment_spectrum(ms, lambda, n_samples, opts),
        }
    }

    pub fn spectrum(&self) -> &[f64] {
        match self {
            TheoryModel::Spectral { spectrum, .. } => &spectrum.mu,
            TheoryModel::Moments(ms) => &ms.mu,
        }
    }

    pub fn rank_effective(&self) -> usize {
        rank_effective(self.spectrum(), DEFAULT_RANK_THRESHOLD)
    }

    /// Risk-minimizing `lambda` over [`lambda_range_for`] the spectrum.
    pub fn optimal_lambda(&self, n_samples: usize, opts: &SolverOptions) -> Result<crate::rmt::LambdaSearch> {
        optimal_lambda(
            |l| self.risk(l, n_samples, opts).map(|(r, _)| r.total),
            lambda_range_for(self.spectrum()),
            1e-6,
        )
    }
}

impl Scenario {
    pub fn sigma_u(&self) -> Result<Matrix> {
        self.model.sigma_u_matrix()
    }

    pub fn truth(&self) -> Result<GroundTruth> {
        self.model.truth()
    }

    pub fn validate(&self) -> Result<()> {
        if self.model.t == 0 {
            return Err(Error::InvalidParam("model.t must be at least 1".into()));
        }
        if !(self.model.sigma >= 0.0) {
            return Err(Error::InvalidParam("model.sigma must be nonnegative".into()));
        }
        if self.sim.n_samples == 0 {
            return Err(Error::InvalidParam("experiment.n_samples must be at least 1".into()));
        }
        if !(self.sim.lambda > 0.0) || !self.sim.lambda.is_finite() {
            return Err(Error::InvalidParam(format!("experiment.lambda must be positive, got {}", self.sim.lambda)));
        }
        if self.map.kind != MapKind::Identity && self.map.n == 0 {
            return Err(Error::InvalidParam("map.n must be at least 1".into()));
        }
        if matches!(self.map.kind, MapKind::LinearEsn | MapKind::Esn) && !(self.map.phi > 0.0 && self.map.phi < 1.0) {
            return Err(Error::InvalidParam(format!("map.phi must lie in (0,1), got {}", self.map.phi)));
        }
        Ok(())
    }

    fn projection_variance(&self) -> f64 {
        self.map.projection_variance.unwrap_or(1.0 / self.model.t as f64)
    }

    pub fn map_source(&self) -> MapSource {
        match self.map.kind {
            MapKind::Identity => MapSource::Fixed(crate::representation::FeatureMap::Identity { dim: self.model.t }),
            MapKind::RandomProjection => MapSource::RandomProjection {
                n: self.map.n,
                variance: self.projection_variance(),
            },
            MapKind::LinearEsn => MapSource::Reservoir {
                n: self.map.n,
                phi: self.map.phi,
                activation: Activation::Identity,
                normalization: self.map.normalization,
            },
            MapKind::Esn => MapSource::Reservoir {
                n: self.map.n,
                phi: self.map.phi,
                activation: self.map.activation,
                normalization: self.map.normalization,
            },
        }
    }

    /// Identity: ridge spectrum. Linear ESN: the large-reservoir spectrum.
    /// Random projection and nonlinear ESN: moments of one map realized from
    /// `derive(seed, GRID)` (Monte Carlo moments when nonlinear).
    pub fn theory_model(&self) -> Result<TheoryModel> {
        self.validate()?;
        let sigma_u = self.sigma_u()?;
        let truth = self.truth()?;
        match self.map.kind {
            MapKind::Identity => Ok(TheoryModel::Spectral {
                spectrum: ridge_spectrum(&sigma_u, &truth)?,
                noise: truth.noise_variance(),
            }),
            MapKind::LinearEsn => Ok(TheoryModel::Spectral {
                spectrum: esn_spectrum(&sigma_u, &truth, self.map.phi)?,
                noise: truth.noise_variance(),
            }),
            MapKind::RandomProjection | MapKind::Esn => {
                let seed = rng::derive(self.seed, rng::tag::GRID);
                let map = self.map_source().realize(self.model.t, seed)?;
                let moments = if self.map.kind == MapKind::RandomProjection {
                    moments_for_map(&sigma_u, &map)?
                } else {
                    moments_monte_carlo(&map, &sigma_u, NONLINEAR_MOMENT_SAMPLES, seed)?
                };
                Ok(TheoryModel::Moments(moment_spectrum(&moments, &truth)?))
            }
        }
    }

    pub fn theory(&self, opts: &SolverOptions) -> Result<(RiskBreakdown, SelfConsistentSolution)> {
        self.theory_model()?.risk(self.sim.lambda, self.sim.n_samples, opts)
    }

    pub fn mc_config(&self) -> McConfig {
        McConfig {
            n_samples: self.sim.n_samples,
            lambda: self.sim.lambda,
            trials: self.sim.trials,
            test_size: self.sim.test_size,
            seed: self.seed,
            resample_map: self.sim.resample_map,
            conditional: self.sim.conditional,
        }
    }

    pub fn empirical(&self) -> Result<EmpiricalRisk> {
        self.validate()?;
        empirical_risk_mc(&self.sigma_u()?, &self.truth()?, &self.map_source(), &self.mc_config())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVariable {
    #[serde(rename = "ratio_n_over_N")]
    RatioNOverN,
    #[serde(rename = "sample_size_N")]
    SampleSizeN,
    #[serde(rename = "decay_rho")]
    DecayRho,
    #[serde(rename = "lambda")]
    Lambda,
    #[serde(rename = "phi")]
    Phi,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::RatioNOverN => "ratio_n_over_N",
            SweepVariable::SampleSizeN => "sample_size_N",
            SweepVariable::DecayRho => "decay_rho",
            SweepVariable::Lambda => "lambda",
            SweepVariable::Phi => "phi",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
    pub base: Scenario,
}

impl SweepSpec {
    pub fn new(variable: SweepVariable, grid: Vec<f64>, base: Scenario) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::InvalidParam("sweep grid is empty".into()));
        }
        if grid.iter().any(|x| !x.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParam("sweep grid must be finite and strictly increasing".into()));
        }
        Ok(Self { variable, grid, base })
    }

    /// The base scenario with the swept variable set to `x` and the seed of
    /// grid point `index`.
    pub fn scenario_at(&self, index: usize, x: f64) -> Result<Scenario> {
        let mut s = self.base.clone();
        s.seed = rng::derive(self.base.seed, index as u64);
        match self.variable {
            SweepVariable::RatioNOverN => {
                let n = (x * s.sim.n_samples as f64).round();
                if !(n >= 1.0) {
                    return Err(Error::InvalidParam(format!("ratio {x} gives no features")));
                }
                s.map.n = n as usize;
            }
            SweepVariable::SampleSizeN => {
                let n_samples = x.round();
                if !(n_samples >= 1.0) {
                    return Err(Error::InvalidParam(format!("N = {x} is not a valid sample size")));
                }
                s.sim.n_samples = n_samples as usize;
            }
            SweepVariable::DecayRho => s.model.theta = ThetaKind::Decay { rho: x },
            SweepVariable::Lambda => s.sim.lambda = x,
            SweepVariable::Phi => s.map.phi = x,
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub x: f64,
    pub n: usize,
    pub n_samples: usize,
    pub lambda: f64,
    /// `None` at a divergent point (`alpha` reached one).
    pub theory: Option<RiskBreakdown>,
    pub alpha: Option<f64>,
    pub delta: Option<f64>,
    pub rank_effective: usize,
    pub empirical: Option<EmpiricalRisk>,
    /// Theory and simulation differ by more than 4 standard errors.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub variable: SweepVariable,
    pub label: String,
    pub points: Vec<PointResult>,
    pub seed: u64,
    pub config_hash: String,
}

impl GridResult {
    pub fn flagged_fraction(&self) -> f64 {
        let with_mc = self.points.iter().filter(|p| p.empirical.is_some() && p.theory.is_some()).count();
        if with_mc == 0 {
            return 0.0;
        }
        self.points.iter().filter(|p| p.flagged).count() as f64 / with_mc as f64
    }
}

/// Hex SHA-256 prefix of the TOML rendering of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    use sha2::{Digest, Sha256};
    // wrapping makes any serializable value a valid TOML document
    #[derive(Serialize)]
    struct Doc<'a, T> {
        value: &'a T,
    }
    let text = match toml::to_string(&Doc { value }) {
        Ok(t) => t,
        Err(e) => {
            log::warn!("config hash falls back to the serializer error: {e}");
            e.to_string()
        }
    };
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn divergent(e: &Error) -> bool {
    matches!(e, Error::AlphaAtOne { .. } | Error::NoConvergence { .. })
}

fn sweep_point(spec: &SweepSpec, index: usize, x: f64, with_empirical: bool) -> Result<PointResult> {
    let scenario = spec.scenario_at(index, x)?;
    let model = scenario.theory_model()?;
    let opts = SolverOptions::default();
    let (theory, alpha, delta) = match model.risk(scenario.sim.lambda, scenario.sim.n_samples, &opts) {
        Ok((r, sol)) => (Some(r), Some(sol.alpha), Some(sol.delta)),
        Err(e) if divergent(&e) => {
            log::info!("{} = {x}: theory diverges ({e})", spec.variable.name());
            (None, None, None)
        }
        Err(e) => return Err(e),
    };
    let empirical = if with_empirical { Some(scenario.empirical()?) } else { None };
    let flagged = match (&theory, &empirical) {
        (Some(t), Some(e)) => (t.total - e.mean).abs() > 4.0 * e.std_error,
        _ => false,
    };
    Ok(PointResult {
        x,
        n: if scenario.map.kind == MapKind::Identity {
            scenario.model.t
        } else {
            scenario.map.n
        },
        n_samples: scenario.sim.n_samples,
        lambda: scenario.sim.lambda,
        theory,
        alpha,
        delta,
        rank_effective: model.rank_effective(),
        empirical,
        flagged,
    })
}

/// Theory (and optionally simulation) at every grid point.
pub fn run_sweep(spec: &SweepSpec, with_empirical: bool) -> Result<GridResult> {
    let points: Vec<Result<PointResult>> = spec
        .grid
        .par_iter()
        .enumerate()
        .map(|(i, &x)| sweep_point(spec, i, x, with_empirical))
        .collect();
    Ok(GridResult {
        variable: spec.variable,
        label: spec.base.map.kind.name().into(),
        points: points.into_iter().collect::<Result<_>>()?,
        seed: spec.base.seed,
        config_hash: config_hash(spec),
    })
}

/// Risk against `n/N` at a small ridge level, one curve per scenario
/// (typically a random projection and a linear ESN).
pub fn double_descent_sweep(ratios: &[f64], scenarios: &[Scenario], lambda: f64, with_empirical: bool) -> Result<Vec<GridResult>> {
    scenarios
        .iter()
        .map(|base| {
            let mut base = base.clone();
            base.sim.lambda = lambda;
            let spec = SweepSpec::new(SweepVariable::RatioNOverN, ratios.to_vec(), base)?;
            let mut result = run_sweep(&spec, with_empirical)?;
            result.label = spec.base.map.kind.name().into();
            Ok(result)
        })
        .collect()
}

/// Ratio grid of the double-descent study, spanning `[0.1, 3]` around the
/// interpolation threshold.
pub const DEFAULT_RATIO_GRID: [f64; 10] = [0.1, 0.25, 0.5, 0.75, 0.9, 1.0, 1.1, 1.5, 2.0, 3.0];

/// Double descent settings: `N = 100`, `lambda = 1e-4`, `sigma = 0.5`, unit-norm
/// random teacher. The projection sees `T = 400` inputs so that its rank can
/// cross `N`; the reservoir sees `T = 60` with `phi = 0.5`.
pub fn double_descent_defaults(seed: u64) -> (Scenario, Scenario) {
    let model = |t: usize| ModelSpec {
        t,
        sigma_u: CovarianceKind::Identity,
        theta: ThetaKind::UnitRows { seed },
        theta_scale: 1.0,
        normalize_theta: false,
        q: 1,
        sigma: 0.5,
    };
    let mut sim = SimSpec::new(100, 1e-4);
    sim.trials = 100;
    sim.test_size = 1000;
    let projection = Scenario {
        model: model(400),
        map: MapSpec::random_projection(100),
        sim: sim.clone(),
        seed,
    };
    let esn = Scenario {
        model: model(60),
        map: MapSpec::linear_esn(100, 0.5),
        sim,
        seed: rng::derive(seed, 1),
    };
    (projection, esn)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Winner {
    Esn,
    Ridge,
}

impl Winner {
    /// ESN wins strict inequalities only.
    pub fn of(esn: f64, ridge: f64) -> Self {
        if esn < ridge {
            Winner::Esn
        } else {
            Winner::Ridge
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Winner::Esn => "esn",
            Winner::Ridge => "ridge",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutcome {
    pub lambda: f64,
    pub theory: RiskBreakdown,
    pub empirical: Option<EmpiricalRisk>,
    pub non_unimodal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCell {
    pub n_samples: usize,
    pub rho: f64,
    pub esn: ModelOutcome,
    pub ridge: ModelOutcome,
    pub theory_winner: Winner,
    pub empirical_winner: Option<Winner>,
    /// Empirical gap exceeds two combined standard errors.
    pub decisive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierPoint {
    pub n_samples: usize,
    /// Linear interpolation of the zero of `esn - ridge` in `rho`.
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpec {
    pub n_grid: Vec<usize>,
    pub rho_grid: Vec<f64>,
    /// ESN scenario; `theta` is replaced by a decay profile per cell and the
    /// ridge competitor uses the identity map on the same data.
    pub base: Scenario,
    /// Both models use this `lambda` instead of their own optimum.
    pub fixed_lambda: Option<f64>,
    pub empirical: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseResult {
    /// Row-major: `N` outer, `rho` inner.
    pub cells: Vec<PhaseCell>,
    pub n_grid: Vec<usize>,
    pub rho_grid: Vec<f64>,
    pub theory_frontier: Vec<FrontierPoint>,
    pub empirical_frontier: Vec<FrontierPoint>,
    pub seed: u64,
    pub config_hash: String,
}

impl PhaseResult {
    pub fn cell(&self, i_n: usize, i_rho: usize) -> &PhaseCell {
        &self.cells[i_n * self.rho_grid.len() + i_rho]
    }

    /// `(agreeing, decisive)` counts of theory versus empirical winners over
    /// the decisive cells.
    pub fn agreement(&self) -> (usize, usize) {
        let decisive: Vec<&PhaseCell> = self.cells.iter().filter(|c| c.decisive).collect();
        let agree = decisive
            .iter()
            .filter(|c| c.empirical_winner == Some(c.theory_winner))
            .count();
        (agree, decisive.len())
    }
}

/// Phase diagram settings: `T = 50`, `n = 300`, `phi = 0.6`, `sigma = 0.3`, decay
/// teacher of unit norm.
pub fn phase_defaults(seed: u64) -> PhaseSpec {
    let mut sim = SimSpec::new(100, 1.0);
    sim.trials = 100;
    sim.test_size = 1000;
    PhaseSpec {
        n_grid: vec![10, 20, 40, 80, 160, 320],
        rho_grid: vec![0.5, 0.7, 0.8, 0.9, 0.95, 1.0],
        base: Scenario {
            model: ModelSpec {
                t: 50,
                sigma_u: CovarianceKind::Identity,
                theta: ThetaKind::Decay { rho: 0.5 },
                theta_scale: 1.0,
                normalize_theta: true,
                q: 1,
                sigma: 0.3,
            },
            map: MapSpec::linear_esn(300, 0.6),
            sim,
            seed,
        },
        fixed_lambda: None,
        empirical: true,
    }
}

fn phase_outcome(scenario: &mut Scenario, fixed: Option<f64>, with_empirical: bool) -> Result<ModelOutcome> {
    let model = scenario.theory_model()?;
    let opts = SolverOptions::default();
    let (lambda, non_unimodal) = match fixed {
        Some(l) => (l, false),
        None => {
            let s = model.optimal_lambda(scenario.sim.n_samples, &opts)?;
            (s.lambda, s.non_unimodal)
        }
    };
    scenario.sim.lambda = lambda;
    let (theory, _) = model.risk(lambda, scenario.sim.n_samples, &opts)?;
    let empirical = if with_empirical { Some(scenario.empirical()?) } else { None };
    Ok(ModelOutcome {
        lambda,
        theory,
        empirical,
        non_unimodal,
    })
}

fn phase_cell(spec: &PhaseSpec, index: usize, n_samples: usize, rho: f64) -> Result<PhaseCell> {
    let seed = rng::derive(spec.base.seed, index as u64);
    let mut esn = spec.base.clone();
    esn.model.theta = ThetaKind::Decay { rho };
    esn.sim.n_samples = n_samples;
    esn.seed = rng::derive(seed, 0);
    let mut ridge = esn.clone();
    ridge.map = MapSpec::identity();
    ridge.seed = rng::derive(seed, 1);

    let esn_out = phase_outcome(&mut esn, spec.fixed_lambda, spec.empirical)?;
    let ridge_out = phase_outcome(&mut ridge, spec.fixed_lambda, spec.empirical)?;
    let theory_winner = Winner::of(esn_out.theory.total, ridge_out.theory.total);
    let (empirical_winner, decisive) = match (&esn_out.empirical, &ridge_out.empirical) {
        (Some(e), Some(r)) => {
            let se = (e.std_error.powi(2) + r.std_error.powi(2)).sqrt();
            (Some(Winner::of(e.mean, r.mean)), (e.mean - r.mean).abs() > 2.0 * se)
        }
        _ => (None, false),
    };
    Ok(PhaseCell {
        n_samples,
        rho,
        esn: esn_out,
        ridge: ridge_out,
        theory_winner,
        empirical_winner,
        decisive,
    })
}

fn frontier(n_grid: &[usize], rho_grid: &[f64], gap: impl Fn(usize, usize) -> Option<f64>) -> Vec<FrontierPoint> {
    let mut out = Vec::new();
    for (i, &n_samples) in n_grid.iter().enumerate() {
        for j in 1..rho_grid.len() {
            let (Some(a), Some(b)) = (gap(i, j - 1), gap(i, j)) else {
                continue;
            };
            if (a < 0.0) != (b < 0.0) {
                let w = if a == b { 0.5 } else { a / (a - b) };
                out.push(FrontierPoint {
                    n_samples,
                    rho: rho_grid[j - 1] + w * (rho_grid[j] - rho_grid[j - 1]),
                });
            }
        }
    }
    out
}

/// ESN versus ridge over an `(N, rho)` grid, each model at its own optimal
/// `lambda` unless `fixed_lambda` is set.
pub fn phase_diagram(spec: &PhaseSpec) -> Result<PhaseResult> {
    if spec.n_grid.is_empty() || spec.rho_grid.is_empty() {
        return Err(Error::InvalidParam("phase diagram grids must be nonempty".into()));
    }
    if spec.base.model.q != 1 {
        return Err(Error::InvalidParam("phase diagram requires q = 1".into()));
    }
    if !matches!(spec.base.map.kind, MapKind::LinearEsn | MapKind::Esn) {
        return Err(Error::InvalidParam("phase diagram compares a reservoir map against ridge".into()));
    }
    let jobs: Vec<(usize, usize, f64)> = spec
        .n_grid
        .iter()
        .flat_map(|&n| spec.rho_grid.iter().map(move |&r| (n, r)))
        .enumerate()
        .map(|(k, (n, r))| (k, n, r))
        .collect();
    let cells: Vec<Result<PhaseCell>> = jobs.par_iter().map(|&(k, n, r)| phase_cell(spec, k, n, r)).collect();
    let cells = cells.into_iter().collect::<Result<Vec<_>>>()?;
    let m = spec.rho_grid.len();
    let theory_frontier = frontier(&spec.n_grid, &spec.rho_grid, |i, j| {
        let c = &cells[i * m + j];
        Some(c.esn.theory.total - c.ridge.theory.total)
    });
    let empirical_frontier = frontier(&spec.n_grid, &spec.rho_grid, |i, j| {
        let c = &cells[i * m + j];
        Some(c.esn.empirical.as_ref()?.mean - c.ridge.empirical.as_ref()?.mean)
    });
    Ok(PhaseResult {
        cells,
        n_grid: spec.n_grid.clone(),
        rho_grid: spec.rho_grid.clone(),
        theory_frontier,
        empirical_frontier,
        seed: spec.base.seed,
        config_hash: config_hash(spec),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StsSpec {
    pub t: usize,
    pub phi: f64,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub normalization: RadiusNormalization,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StsRow {
    pub n: usize,
    /// Average of `S^T S` over the sampled reservoirs.
    pub mean_sts: Matrix,
    /// Largest entrywise distance of `mean_sts` from the limit.
    pub mean_deviation: f64,
    /// Average over reservoirs of the largest entrywise distance from the limit.
    pub deviation: f64,
    /// Average of `|[S^T S]_{12}|`.
    pub offdiag_12: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StsStudy {
    /// `phi^{i-T}` for `i = 1..T`.
    pub limit: Vec<f64>,
    pub rows: Vec<StsRow>,
    /// Least-squares slope of `log deviation` against `log n`.
    pub slope: f64,
    pub config_hash: String,
}

/// Least-squares slope of `y` on `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Samples reservoirs of growing size and measures how fast the Gram matrix
/// of the controllability matrix approaches its diagonal limit.
pub fn sts_concentration_study(spec: &StsSpec) -> Result<StsStudy> {
    if spec.t == 0 || spec.t > 20 {
        return Err(Error::InvalidParam(format!("concentration study needs 1 <= T <= 20, got {}", spec.t)));
    }
    if spec.n_grid.is_empty() || spec.n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParam("n_grid must be nonempty and strictly increasing".into()));
    }
    if spec.reps == 0 {
        return Err(Error::InvalidParam("reps must be positive".into()));
    }
    let t = spec.t;
    let limit: Vec<f64> = (1..=t).map(|i| spec.phi.powi(i as i32 - t as i32)).collect();
    let mut rows = Vec::with_capacity(spec.n_grid.len());
    for (k, &n) in spec.n_grid.iter().enumerate() {
        let level = rng::derive(spec.seed, k as u64);
        let draws: Vec<Result<Matrix>> = (0..spec.reps)
            .into_par_iter()
            .map(|r| {
                let res = sample_reservoir(&ReservoirParams {
                    n,
                    t,
                    phi: spec.phi,
                    activation: Activation::Identity,
                    seed: rng::derive(level, r as u64),
                    normalization: spec.normalization,
                })?;
                let s = res.controllability(t)?;
                Ok(s.transpose() * s)
            })
            .collect();
        let mut mean = Matrix::zeros(t, t);
        let mut deviation = 0.0;
        let mut offdiag = 0.0;
        for d in draws {
            let g = d?;
            deviation += max_deviation(&g, &limit);
            if t > 1 {
                offdiag += g[(0, 1)].abs();
            }
            mean += g;
        }
        let inv = 1.0 / spec.reps as f64;
        mean *= inv;
        rows.push(StsRow {
            n,
            mean_deviation: max_deviation(&mean, &limit),
            mean_sts: mean,
            deviation: deviation * inv,
            offdiag_12: offdiag * inv,
        });
    }
    let slope = if rows.len() > 1 {
        let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.deviation.ln()).collect();
        fit_slope(&x, &y)
    } else {
        f64::NAN
    };
    Ok(StsStudy {
        limit,
        rows,
        slope,
        config_hash: config_hash(spec),
    })
}

fn max_deviation(g: &Matrix, limit: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { limit[i] } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Size {
    pub t: usize,
    /// Feature count; ignored by the identity map.
    #[serde(default)]
    pub n: usize,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSpec {
    pub base: Scenario,
    pub sizes: Vec<Size>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub size: Size,
    pub theory: RiskBreakdown,
    pub empirical: EmpiricalRisk,
    /// `|theory - empirical| / theory`, zero when both vanish.
    pub rel_gap: f64,
    /// The gap is within three standard errors.
    pub within_noise: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub config_hash: String,
}

/// Theory against simulation at growing proportional sizes.
pub fn convergence_study(spec: &ConvergenceSpec) -> Result<ConvergenceTable> {
    if spec.sizes.is_empty() {
        return Err(Error::InvalidParam("convergence study needs at least one size".into()));
    }
    let mut rows = Vec::with_capacity(spec.sizes.len());
    for (k, size) in spec.sizes.iter().enumerate() {
        let mut s = spec.base.clone();
        s.model.t = size.t;
        s.map.n = size.n;
        s.sim.n_samples = size.n_samples;
        s.seed = rng::derive(spec.base.seed, k as u64);
        let (theory, _) = s.theory(&SolverOptions::default())?;
        let empirical = s.empirical()?;
        let diff = (theory.total - empirical.mean).abs();
        let rel_gap = if theory.total > 0.0 { diff / theory.total } else { diff };
        rows.push(ConvergenceRow {
            size: *size,
            theory,
            within_noise: diff <= 3.0 * empirical.std_error,
            empirical,
            rel_gap,
        });
    }
    Ok(ConvergenceTable {
        rows,
        config_hash: config_hash(spec),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ridge_scenario() -> Scenario {
        Scenario {
            model: ModelSpec {
                t: 20,
                sigma_u: CovarianceKind::Identity,
                theta: ThetaKind::Decay { rho: 0.8 },
                theta_scale: 1.0,
                normalize_theta: true,
                q: 1,
                sigma: 0.5,
            },
            map: MapSpec::identity(),
            sim: SimSpec::new(40, 0.1),
            seed: 3,
        }
    }

    #[test]
    fn grid_validation() {
        let base = ridge_scenario();
        assert!(SweepSpec::new(SweepVariable::Lambda, vec![], base.clone()).is_err());
        assert!(SweepSpec::new(SweepVariable::Lambda, vec![0.1, 0.1], base.clone()).is_err());
        assert!(SweepSpec::new(SweepVariable::Lambda, vec![0.1, 0.2], base).is_ok());
    }

    #[test]
    fn scenario_at_sets_variable() {
        let mut base = ridge_scenario();
        base.map = MapSpec::random_projection(10);
        let spec = SweepSpec::new(SweepVariable::RatioNOverN, vec![0.5, 1.5], base).unwrap();
        assert_eq!(spec.scenario_at(0, 0.5).unwrap().map.n, 20);
        assert_eq!(spec.scenario_at(1, 1.5).unwrap().map.n, 60);
        assert_ne!(spec.scenario_at(0, 0.5).unwrap().seed, spec.scenario_at(1, 0.5).unwrap().seed);
    }

    #[test]
    fn theory_sweep_is_deterministic() {
        let spec = SweepSpec::new(SweepVariable::Lambda, vec![0.01, 0.1, 1.0], ridge_scenario()).unwrap();
        let a = run_sweep(&spec, false).unwrap();
        let b = run_sweep(&spec, false).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.config_hash.len(), 16);
        let other = SweepSpec::new(SweepVariable::Lambda, vec![0.01, 0.1, 2.0], ridge_scenario()).unwrap();
        assert_ne!(config_hash(&other), a.config_hash);
    }

    #[test]
    fn frontier_interpolates_sign_change() {
        let f = frontier(&[10], &[0.2, 0.4], |_, j| Some(if j == 0 { -1.0 } else { 3.0 }));
        assert_eq!(f.len(), 1);
        assert!((f[0].rho - 0.25).abs() < 1e-15);
    }

    #[test]
    fn slope_of_power_law() {
        let x: Vec<f64> = [1.0f64, 2.0, 4.0, 8.0].iter().map(|v| v.ln()).collect();
        let y: Vec<f64> = [1.0f64, 2.0, 4.0, 8.0].iter().map(|v| (3.0 * v.powf(-0.5)).ln()).collect();
        assert!((fit_slope(&x, &y) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn sts_limit_vector() {
        let s = sts_concentration_study(&StsSpec {
            t: 3,
            phi: 0.5,
            n_grid: vec![50],
            reps: 2,
            seed: 1,
            normalization: RadiusNormalization::Asymptotic,
        })
        .unwrap();
        assert_eq!(s.limit, vec![4.0, 2.0, 1.0]);
        assert!(s.slope.is_nan());
    }
}
