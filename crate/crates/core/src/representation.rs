//! Feature maps: identity, random projection and echo state reservoirs.
//!
//! A reservoir is driven by a scalar input sequence `u(1..T)` through
//! `x(t) = f(u(t) w_in + W x(t-1))` with `x(0) = 0`, and the representation
//! is the final state `x(T)`. For the identity activation this collapses to
//! `z = S u` with the controllability matrix
//! `S = [W^{T-1} w_in, ..., W w_in, w_in]`.

use nalgebra::Schur;
use serde::{Deserialize, Serialize};

use crate::{rng, Error, Matrix, Result, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Identity,
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }
}

/// How the Gaussian matrix `W0` is normalized to reach the target radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RadiusNormalization {
    /// Divide by the exact spectral radius `rho(W0)` (dense eigensolver).
    #[default]
    Exact,
    /// Divide by `sqrt(n)`, the almost-sure limit of `rho(W0)`.
    Asymptotic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirParams {
    pub n: usize,
    pub t: usize,
    /// Memory factor in `(0, 1)`; see [`target_radius`].
    pub phi: f64,
    pub activation: Activation,
    pub seed: u64,
    pub normalization: RadiusNormalization,
}

impl ReservoirParams {
    pub fn linear(n: usize, t: usize, phi: f64, seed: u64) -> Self {
        Self {
            n,
            t,
            phi,
            activation: Activation::Identity,
            seed,
            normalization: RadiusNormalization::Exact,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.t == 0 {
            return Err(Error::InvalidParam("reservoir needs n >= 1 and T >= 1".into()));
        }
        if !(self.phi > 0.0 && self.phi < 1.0) {
            return Err(Error::InvalidParam(format!(
                "phi must lie in (0,1), got {}",
                self.phi
            )));
        }
        Ok(())
    }
}

/// Spectral radius the recurrent matrix is rescaled to.
///
/// With `W = r W0 / rho(W0)` and `w_in ~ N(0, I/n)`, the Gram matrix of the
/// controllability matrix tends to `diag(r^{2(T-1)}, ..., r^2, 1)`. Choosing
/// `r = phi^{-1/2}` makes that limit `diag(phi^{i-T})`, the time weighting of
/// the linear-ESN risk formula.
pub fn target_radius(phi: f64) -> f64 {
    phi.powf(-0.5)
}

/// Fixed input and recurrent weights of a reservoir.
#[derive(Debug, Clone, PartialEq)]
pub struct Reservoir {
    pub w: Matrix,
    pub w_in: Vector,
}

impl Reservoir {
    pub fn controllability(&self, t: usize) -> Result<Matrix> {
        build_controllability_matrix(&self.w, &self.w_in, t)
    }
}

/// Samples `W0` with i.i.d. standard normal entries and `w_in` with i.i.d.
/// `N(0, 1/n)` entries from stream `(seed, RESERVOIR)`, then rescales `W0`
/// so that `rho(W) = target_radius(phi)`.
pub fn sample_reservoir(params: &ReservoirParams) -> Result<Reservoir> {
    params.validate()?;
    let n = params.n;
    let mut g = rng::stream(params.seed, rng::tag::RESERVOIR);
    let w0 = rng::standard_normal_matrix(&mut g, n, n);
    let w_in = rng::standard_normal_matrix(&mut g, n, 1).column(0) / (n as f64).sqrt();
    let denom = match params.normalization {
        RadiusNormalization::Exact => spectral_radius(&w0)?,
        RadiusNormalization::Asymptotic => (n as f64).sqrt(),
    };
    if !(denom > 0.0) {
        return Err(Error::NumericalFailure("sample_reservoir: zero spectral radius".into()));
    }
    let w = w0 * (target_radius(params.phi) / denom);
    Ok(Reservoir { w, w_in })
}

/// Largest eigenvalue modulus of a square (generally nonsymmetric) matrix.
pub fn spectral_radius(w: &Matrix) -> Result<f64> {
    if !w.is_square() {
        return Err(Error::dim("spectral_radius", w.nrows(), w.ncols()));
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("spectral_radius: non-finite input".into()));
    }
    if w.nrows() == 0 {
        return Ok(0.0);
    }
    let max_iter = 200 * w.nrows().max(10);
    let schur = Schur::try_new(w.clone(), f64::EPSILON, max_iter)
        .ok_or_else(|| Error::NumericalFailure("spectral_radius: Schur iteration did not converge".into()))?;
    let radius = schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    Ok(radius)
}

/// `S = [W^{T-1} w_in, ..., W^0 w_in]`, filled right to left.
pub fn build_controllability_matrix(w: &Matrix, w_in: &Vector, t: usize) -> Result<Matrix> {
    let n = w_in.len();
    if w.nrows() != n || w.ncols() != n {
        return Err(Error::dim("controllability matrix", n, w.nrows()));
    }
    if t == 0 {
        return Err(Error::InvalidParam("T must be positive".into()));
    }
    let mut s = Matrix::zeros(n, t);
    let mut col = w_in.clone();
    s.set_column(t - 1, &col);
    for j in (0..t - 1).rev() {
        col = w * &col;
        s.set_column(j, &col);
    }
    Ok(s)
}

/// Runs the recurrence for `u.len()` steps from a zero state and returns the
/// final state.
pub fn simulate_reservoir(w: &Matrix, w_in: &Vector, u: &[f64], activation: Activation) -> Result<Vector> {
    let n = w_in.len();
    if w.nrows() != n || w.ncols() != n {
        return Err(Error::dim("simulate_reservoir", n, w.nrows()));
    }
    let mut x = Vector::zeros(n);
    let mut pre = Vector::zeros(n);
    for (step, &ut) in u.iter().enumerate() {
        pre.gemv(1.0, w, &x, 0.0);
        pre.axpy(ut, w_in, 1.0);
        x = pre.map(|v| activation.apply(v));
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { step: step + 1 });
        }
    }
    Ok(x)
}

/// A fixed representation `z = F(u)` from `R^T` to `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMap {
    Identity { dim: usize },
    /// `z = P u` with `P` of shape `n x T`.
    RandomProjection { proj: Matrix },
    /// `z = S u` with the controllability matrix `S` (`n x T`).
    LinearEsn { s: Matrix },
    NonlinearEsn {
        reservoir: Reservoir,
        t: usize,
        activation: Activation,
    },
}

impl FeatureMap {
    pub fn input_dim(&self) -> usize {
        match self {
            FeatureMap::Identity { dim } => *dim,
            FeatureMap::RandomProjection { proj } => proj.ncols(),
            FeatureMap::LinearEsn { s } => s.ncols(),
            FeatureMap::NonlinearEsn { t, .. } => *t,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            FeatureMap::Identity { dim } => *dim,
            FeatureMap::RandomProjection { proj } => proj.nrows(),
            FeatureMap::LinearEsn { s } => s.nrows(),
            FeatureMap::NonlinearEsn { reservoir, .. } => reservoir.w_in.len(),
        }
    }

    /// The matrix `A` with `F(u) = A u`, when the map is linear.
    pub fn linear_matrix(&self) -> Option<Matrix> {
        match self {
            FeatureMap::Identity { dim } => Some(Matrix::identity(*dim, *dim)),
            FeatureMap::RandomProjection { proj } => Some(proj.clone()),
            FeatureMap::LinearEsn { s } => Some(s.clone()),
            FeatureMap::NonlinearEsn {
                reservoir,
                t,
                activation: Activation::Identity,
            } => reservoir.controllability(*t).ok(),
            FeatureMap::NonlinearEsn { .. } => None,
        }
    }

    /// Linear ESN map built from a sampled reservoir.
    pub fn linear_esn(reservoir: &Reservoir, t: usize) -> Result<Self> {
        Ok(FeatureMap::LinearEsn {
            s: reservoir.controllability(t)?,
        })
    }
}

/// `n x T` projection with i.i.d. `N(0, variance)` entries; `variance`
/// defaults to `1/T` in the experiment configs.
pub fn random_projection(n: usize, t: usize, variance: f64, seed: u64) -> Result<FeatureMap> {
    if n == 0 || t == 0 {
        return Err(Error::InvalidParam("projection needs n >= 1 and T >= 1".into()));
    }
    if !(variance > 0.0) {
        return Err(Error::InvalidParam(format!("projection variance must be positive, got {variance}")));
    }
    let mut g = rng::stream(seed, rng::tag::PROJECTION);
    let proj = rng::standard_normal_matrix(&mut g, n, t) * variance.sqrt();
    Ok(FeatureMap::RandomProjection { proj })
}

/// Applies the map column-wise to `u` (`T x N`), returning `Z` (`n x N`).
pub fn apply_feature_map(map: &FeatureMap, u: &Matrix) -> Result<Matrix> {
    let t = map.input_dim();
    if u.nrows() != t {
        return Err(Error::dim("apply_feature_map input rows", t, u.nrows()));
    }
    match map {
        FeatureMap::Identity { .. } => Ok(u.clone()),
        FeatureMap::RandomProjection { proj } => Ok(proj * u),
        FeatureMap::LinearEsn { s } => Ok(s * u),
        FeatureMap::NonlinearEsn {
            reservoir,
            activation,
            ..
        } => {
            let mut z = Matrix::zeros(reservoir.w_in.len(), u.ncols());
            for (i, col) in u.column_iter().enumerate() {
                let seq: Vec<f64> = col.iter().copied().collect();
                let x = simulate_reservoir(&reservoir.w, &reservoir.w_in, &seq, *activation)?;
                z.set_column(i, &x);
            }
            Ok(z)
        }
    }
}
