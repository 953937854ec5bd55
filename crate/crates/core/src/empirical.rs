//! Monte Carlo simulation of the noisy linear teacher, ridge readouts and
//! sampled resolvents.
//!
//! Every trial is an independent work unit with its own seed
//! `derive(seed, trial)`; results are collected in trial order so serial and
//! parallel runs agree bit for bit.

use nalgebra::{Cholesky, SVD};
use rayon::prelude::*;

use crate::covariance::{matrix_sqrt, symmetrize, GroundTruth};
use crate::moments::{moments_for_map, moments_monte_carlo, PopulationMoments};
use crate::representation::{
    apply_feature_map, random_projection, sample_reservoir, Activation, FeatureMap, RadiusNormalization,
    ReservoirParams,
};
use crate::{rng, Error, Matrix, Result};

/// Inputs `U` (`T x N`) and targets `Y = Theta^T U + E` (`q x N`).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub u: Matrix,
    pub y: Matrix,
    pub seed: u64,
}

/// Draws columns `u ~ N(0, Sigma_u)` through a fixed square root.
#[derive(Debug, Clone)]
pub struct InputModel {
    sigma_u: Matrix,
    root: Matrix,
    truth: GroundTruth,
}

impl InputModel {
    pub fn new(sigma_u: &Matrix, truth: &GroundTruth) -> Result<Self> {
        if truth.dim() != sigma_u.nrows() {
            return Err(Error::dim("input model theta rows", sigma_u.nrows(), truth.dim()));
        }
        Ok(Self {
            sigma_u: sigma_u.clone(),
            root: matrix_sqrt(sigma_u)?,
            truth: truth.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.root.nrows()
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }

    /// Samples `columns` pairs from stream `(seed, stream)`: first the
    /// standard normal input block, then the noise block.
    pub fn sample(&self, columns: usize, seed: u64, stream: u64) -> Dataset {
        let mut g = rng::stream(seed, stream);
        let u = &self.root * rng::standard_normal_matrix(&mut g, self.dim(), columns);
        let e = rng::standard_normal_matrix(&mut g, self.truth.q(), columns);
        let mut y = self.truth.theta.transpose() * &u;
        if self.truth.sigma_noise > 0.0 {
            y += e * self.truth.sigma_noise;
        }
        Dataset { u, y, seed }
    }
}

pub fn sample_dataset(sigma_u: &Matrix, truth: &GroundTruth, n_samples: usize, seed: u64) -> Result<Dataset> {
    if n_samples == 0 {
        return Err(Error::InvalidParam("N must be positive".into()));
    }
    Ok(InputModel::new(sigma_u, truth)?.sample(n_samples, seed, rng::tag::TRAIN))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    /// `q x n`
    pub w_out: Matrix,
    pub lambda: f64,
    pub n: usize,
    pub n_samples: usize,
}

impl RidgeModel {
    pub fn predict(&self, z: &Matrix) -> Matrix {
        &self.w_out * z
    }

    /// `||W (Z Z^T/N + lambda I) - Y Z^T/N||_F / ||Y Z^T/N||_F`.
    pub fn normal_equation_residual(&self, z: &Matrix, y: &Matrix) -> f64 {
        let inv_n = 1.0 / self.n_samples as f64;
        let rhs = y * z.transpose() * inv_n;
        let lhs = (&self.w_out * z) * z.transpose() * inv_n + &self.w_out * self.lambda;
        let scale = rhs.norm();
        if scale == 0.0 {
            lhs.norm()
        } else {
            (lhs - rhs).norm() / scale
        }
    }
}

/// Condition estimate above which the Gram route is abandoned for the SVD.
const GRAM_CONDITION_LIMIT: f64 = 1e10;

/// Solves `A X = B` by Cholesky when `A` is positive definite and reasonably
/// conditioned; `None` otherwise.
fn cholesky_solve(a: Matrix, b: &Matrix) -> Option<Matrix> {
    let ch = Cholesky::new(a)?;
    let diag = ch.l_dirty().diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    if !(lo > 0.0) || (hi / lo).powi(2) > GRAM_CONDITION_LIMIT {
        return None;
    }
    let x = ch.solve(b);
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// `W = Y B diag(d / (d^2 + N lambda)) A^T` from the thin SVD `Z = A D B^T`.
/// Works on `Z` directly, so it does not square the condition number.
fn ridge_svd(z: &Matrix, y: &Matrix, lambda: f64) -> Result<Matrix> {
    let n_samples = z.ncols() as f64;
    let svd = SVD::try_new(z.clone(), true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::NumericalFailure("ridge_fit: SVD did not converge".into()))?;
    let (a, bt) = match (svd.u, svd.v_t) {
        (Some(a), Some(bt)) => (a, bt),
        _ => return Err(Error::NumericalFailure("ridge_fit: SVD vectors missing".into())),
    };
    let shrink = svd.singular_values.map(|d| d / (d * d + n_samples * lambda));
    let yb = y * bt.transpose();
    let scaled = Matrix::from_fn(yb.nrows(), yb.ncols(), |i, j| yb[(i, j)] * shrink[j]);
    let w = scaled * a.transpose();
    if w.iter().all(|v| v.is_finite()) {
        Ok(w)
    } else {
        Err(Error::NumericalFailure("ridge_fit: non-finite readout".into()))
    }
}

/// Ridge readout `W = (1/N) Y Z^T (Z Z^T / N + lambda I)^{-1}`.
///
/// The regularized Gram system is solved by Cholesky in the primal (`n x n`)
/// or dual (`N x N`) form, whichever is smaller. Feature matrices whose Gram
/// matrix is too ill-conditioned for that (linear reservoirs with a large
/// dynamic range) go through the SVD of `Z` instead.
pub fn ridge_fit(z: &Matrix, y: &Matrix, lambda: f64) -> Result<RidgeModel> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParam(format!("lambda must be positive, got {lambda}")));
    }
    let (n, n_samples) = z.shape();
    if y.ncols() != n_samples {
        return Err(Error::dim("ridge_fit sample count", n_samples, y.ncols()));
    }
    if n_samples == 0 {
        return Err(Error::InvalidParam("ridge_fit needs at least one sample".into()));
    }
    if z.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("ridge_fit: non-finite data".into()));
    }
    let inv_n = 1.0 / n_samples as f64;
    let gram_route = if n <= n_samples {
        let mut gram = z * z.transpose() * inv_n;
        for i in 0..n {
            gram[(i, i)] += lambda;
        }
        let rhs = z * y.transpose() * inv_n;
        cholesky_solve(symmetrize(&gram), &rhs).map(|x| x.transpose())
    } else {
        let mut gram = z.transpose() * z * inv_n;
        for i in 0..n_samples {
            gram[(i, i)] += lambda;
        }
        cholesky_solve(symmetrize(&gram), &y.transpose()).map(|x| (z * x * inv_n).transpose())
    };
    let w_out = match gram_route {
        Some(w) => w,
        None => ridge_svd(z, y, lambda)?,
    };
    Ok(RidgeModel {
        w_out,
        lambda,
        n,
        n_samples,
    })
}

/// Exact out-of-sample risk of a readout on a linear map `z = A u`:
/// `(1/q) ||Sigma_u^{1/2} (Theta - A^T W^T)||_F^2 + sigma^2`.
pub fn conditional_risk_linear(model: &RidgeModel, map: &Matrix, sqrt_sigma_u: &Matrix, truth: &GroundTruth) -> f64 {
    let effective = map.transpose() * model.w_out.transpose();
    let err = sqrt_sigma_u * (&truth.theta - effective);
    err.norm_squared() / truth.q() as f64 + truth.noise_variance()
}

/// Exact out-of-sample risk of a fitted readout given population moments:
/// `(1/q)[Tr(Th^T Su Th) - 2 Tr(Th^T Suz W^T) + Tr(W Sz W^T)] + sigma^2`.
pub fn conditional_risk(model: &RidgeModel, moments: &PopulationMoments, truth: &GroundTruth) -> f64 {
    let theta = &truth.theta;
    let w = &model.w_out;
    let a = (theta.transpose() * &moments.sigma_u * theta).trace();
    let b = (theta.transpose() * &moments.sigma_uz * w.transpose()).trace();
    let c = (w * &moments.sigma_z * w.transpose()).trace();
    (a - 2.0 * b + c).max(0.0) / truth.q() as f64 + truth.noise_variance()
}

/// Mean squared prediction error per output on a held-out set.
pub fn test_risk(model: &RidgeModel, z_test: &Matrix, y_test: &Matrix) -> f64 {
    let resid = y_test - model.predict(z_test);
    resid.norm_squared() / (y_test.nrows() * y_test.ncols()) as f64
}

const CONDITIONAL_MOMENT_SAMPLES: usize = 20_000;

/// Where the feature map of each trial comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum MapSource {
    Fixed(FeatureMap),
    RandomProjection {
        n: usize,
        variance: f64,
    },
    Reservoir {
        n: usize,
        phi: f64,
        activation: Activation,
        normalization: RadiusNormalization,
    },
}

impl MapSource {
    /// Draws a concrete map for inputs of length `t`.
    pub fn realize(&self, t: usize, seed: u64) -> Result<FeatureMap> {
        match self {
            MapSource::Fixed(map) => {
                if map.input_dim() != t {
                    return Err(Error::dim("fixed map input", t, map.input_dim()));
                }
                Ok(map.clone())
            }
            MapSource::RandomProjection { n, variance } => random_projection(*n, t, *variance, seed),
            MapSource::Reservoir {
                n,
                phi,
                activation,
                normalization,
            } => {
                let reservoir = sample_reservoir(&ReservoirParams {
                    n: *n,
                    t,
                    phi: *phi,
                    activation: *activation,
                    seed,
                    normalization: *normalization,
                })?;
                match activation {
                    Activation::Identity => FeatureMap::linear_esn(&reservoir, t),
                    _ => Ok(FeatureMap::NonlinearEsn {
                        reservoir,
                        t,
                        activation: *activation,
                    }),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub n_samples: usize,
    pub lambda: f64,
    pub trials: usize,
    pub test_size: usize,
    pub seed: u64,
    /// Draw a fresh map (reservoir or projection) in every trial.
    pub resample_map: bool,
    /// Replace the finite test set by the exact conditional risk (linear maps).
    pub conditional: bool,
}

impl McConfig {
    pub fn new(n_samples: usize, lambda: f64, trials: usize, seed: u64) -> Self {
        Self {
            n_samples,
            lambda,
            trials,
            test_size: 2000,
            seed,
            resample_map: false,
            conditional: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalRisk {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
    pub per_trial: Vec<f64>,
}

impl EmpiricalRisk {
    pub fn from_trials(per_trial: Vec<f64>) -> Self {
        let k = per_trial.len();
        let mean = per_trial.iter().sum::<f64>() / k as f64;
        let std_error = if k > 1 {
            let var = per_trial.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
            (var / k as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std_error,
            trials: k,
            per_trial,
        }
    }
}

fn run_trial(
    model: &InputModel,
    source: &MapSource,
    shared: Option<&FeatureMap>,
    cfg: &McConfig,
    trial: usize,
) -> Result<f64> {
    let seed = rng::derive(cfg.seed, trial as u64);
    let owned;
    let map = match shared {
        Some(m) => m,
        None => {
            owned = source.realize(model.dim(), seed)?;
            &owned
        }
    };
    let train = model.sample(cfg.n_samples, seed, rng::tag::TRAIN);
    let z = apply_feature_map(map, &train.u)?;
    let fit = ridge_fit(&z, &train.y, cfg.lambda)?;
    if cfg.conditional {
        match map.linear_matrix() {
            Some(a) => Ok(conditional_risk_linear(&fit, &a, &model.root, model.truth())),
            None => {
                let moments = moments_monte_carlo(map, &model.sigma_u, CONDITIONAL_MOMENT_SAMPLES, seed)?;
                Ok(conditional_risk(&fit, &moments, model.truth()))
            }
        }
    } else {
        let test = model.sample(cfg.test_size, seed, rng::tag::TEST);
        let z_test = apply_feature_map(map, &test.u)?;
        Ok(test_risk(&fit, &z_test, &test.y))
    }
}

/// Monte Carlo estimate of the out-of-sample risk over independent trials.
pub fn empirical_risk_mc(sigma_u: &Matrix, truth: &GroundTruth, source: &MapSource, cfg: &McConfig) -> Result<EmpiricalRisk> {
    if cfg.trials == 0 || cfg.test_size == 0 || cfg.n_samples == 0 {
        return Err(Error::InvalidParam("trials, test_size and N must be positive".into()));
    }
    let model = InputModel::new(sigma_u, truth)?;
    let shared = if cfg.resample_map {
        None
    } else {
        Some(source.realize(model.dim(), cfg.seed)?)
    };
    let per_trial: Vec<Result<f64>> = (0..cfg.trials)
        .into_par_iter()
        .map(|k| run_trial(&model, source, shared.as_ref(), cfg, k))
        .collect();
    let per_trial = per_trial.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(EmpiricalRisk::from_trials(per_trial))
}

/// Averages of the sampled resolvent `Q = (Z Z^T/N + lambda I)^{-1}` and of
/// `Q Sigma_z Q` over `reps` independent training sets.
#[derive(Debug, Clone)]
pub struct ResolventMean {
    pub mean_q: Matrix,
    pub mean_q_sz_q: Matrix,
    pub sigma_z: Matrix,
}

pub fn resolvent_mean(
    map: &FeatureMap,
    sigma_u: &Matrix,
    n_samples: usize,
    lambda: f64,
    reps: usize,
    seed: u64,
) -> Result<ResolventMean> {
    if reps < 10 {
        return Err(Error::InvalidParam(format!("resolvent_mean needs reps >= 10, got {reps}")));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParam(format!("lambda must be positive, got {lambda}")));
    }
    let sigma_z = match moments_for_map(sigma_u, map) {
        Ok(m) => m.sigma_z,
        Err(Error::InvalidParam(_)) => moments_monte_carlo(map, sigma_u, 100_000, seed)?.sigma_z,
        Err(e) => return Err(e),
    };
    let t = sigma_u.nrows();
    let root = matrix_sqrt(sigma_u)?;
    let n = map.n_features();
    let inv_n = 1.0 / n_samples as f64;

    let draws: Vec<Result<(Matrix, Matrix)>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::stream(seed, rng::derive(rng::tag::RESOLVENT, r as u64));
            let u = &root * rng::standard_normal_matrix(&mut g, t, n_samples);
            let z = apply_feature_map(map, &u)?;
            let mut gram = &z * z.transpose() * inv_n;
            for i in 0..n {
                gram[(i, i)] += lambda;
            }
            let q = Cholesky::new(symmetrize(&gram))
                .ok_or_else(|| Error::NumericalFailure("resolvent_mean: Cholesky failed".into()))?
                .inverse();
            let qsq = &q * &sigma_z * &q;
            Ok((q, qsq))
        })
        .collect();

    let mut mean_q = Matrix::zeros(n, n);
    let mut mean_q_sz_q = Matrix::zeros(n, n);
    for d in draws {
        let (q, qsq) = d?;
        mean_q += q;
        mean_q_sz_q += qsq;
    }
    let inv = 1.0 / reps as f64;
    Ok(ResolventMean {
        mean_q: mean_q * inv,
        mean_q_sz_q: mean_q_sz_q * inv,
        sigma_z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ridge_hand_example() {
        let z = Matrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let y = Matrix::from_element(1, 1, 1.0);
        let m = ridge_fit(&z, &y, 1.0).unwrap();
        assert!((m.w_out[(0, 0)] - 0.5).abs() < 1e-15);
        assert_eq!(m.w_out[(0, 1)], 0.0);
    }

    #[test]
    fn ridge_zero_target_and_shrinkage() {
        let mut g = rng::stream(4, 4);
        let z = rng::standard_normal_matrix(&mut g, 6, 20);
        let m = ridge_fit(&z, &Matrix::zeros(2, 20), 0.1).unwrap();
        assert_eq!(m.w_out.amax(), 0.0);
        let y = rng::standard_normal_matrix(&mut g, 2, 20);
        let m = ridge_fit(&z, &y, 1e8).unwrap();
        assert!(m.w_out.norm() <= (&y * z.transpose()).norm() / (20.0 * 1e8));
        assert!(ridge_fit(&z, &y, 0.0).is_err());
    }

    #[test]
    fn primal_and_dual_agree() {
        let mut g = rng::stream(5, 5);
        let z = rng::standard_normal_matrix(&mut g, 30, 12);
        let y = rng::standard_normal_matrix(&mut g, 2, 12);
        let dual = ridge_fit(&z, &y, 0.3).unwrap();
        // primal by hand
        let mut a = &z * z.transpose() / 12.0;
        for i in 0..30 {
            a[(i, i)] += 0.3;
        }
        let primal = (a.try_inverse().unwrap() * &z * y.transpose() / 12.0).transpose();
        assert!((dual.w_out - primal).norm() < 1e-10);
        assert!(dual_residual_small(&z, &y));
    }

    fn dual_residual_small(z: &Matrix, y: &Matrix) -> bool {
        ridge_fit(z, y, 0.3).unwrap().normal_equation_residual(z, y) < 1e-10
    }

    #[test]
    fn noiseless_dataset() {
        let truth = GroundTruth::new(Matrix::from_column_slice(3, 1, &[1.0, -2.0, 0.5]), 0.0).unwrap();
        let d = sample_dataset(&Matrix::identity(3, 3), &truth, 50, 7).unwrap();
        assert_eq!(d.y, truth.theta.transpose() * &d.u);
        let again = sample_dataset(&Matrix::identity(3, 3), &truth, 50, 7).unwrap();
        assert_eq!(d, again);
    }

    #[test]
    fn empirical_risk_bookkeeping() {
        let r = EmpiricalRisk::from_trials(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(r.mean, 2.5);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((r.std_error - sd / 2.0).abs() < 1e-15);
    }
}
