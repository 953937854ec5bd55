//! Population input covariances, symmetric square roots and ground truth.

use nalgebra::SymmetricEigen;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{rng, Error, Matrix, Result, Vector};

/// Relative asymmetry tolerated before a matrix is rejected.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Eigenvalues below `-PSD_TOL * ||M||` are treated as genuinely negative.
pub const PSD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovarianceKind {
    Identity,
    /// Stationary AR(1) correlation, entries `decay^|i-j|`.
    Ar1 { decay: f64 },
    Diagonal { values: Vec<f64> },
    Explicit { matrix: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSpec {
    pub kind: CovarianceKind,
    pub dim: usize,
}

impl CovarianceSpec {
    pub fn identity(dim: usize) -> Self {
        Self {
            kind: CovarianceKind::Identity,
            dim,
        }
    }

    pub fn ar1(decay: f64, dim: usize) -> Self {
        Self {
            kind: CovarianceKind::Ar1 { decay },
            dim,
        }
    }

    pub fn diagonal(values: Vec<f64>) -> Self {
        let dim = values.len();
        Self {
            kind: CovarianceKind::Diagonal { values },
            dim,
        }
    }

    pub fn explicit(matrix: &Matrix) -> Self {
        let rows = matrix.row_iter().map(|r| r.iter().copied().collect()).collect();
        Self {
            kind: CovarianceKind::Explicit { matrix: rows },
            dim: matrix.nrows(),
        }
    }
}

/// Realizes the covariance described by `spec`.
pub fn build_covariance(spec: &CovarianceSpec) -> Result<Matrix> {
    let t = spec.dim;
    if t == 0 {
        return Err(Error::InvalidCovariance("dimension must be positive".into()));
    }
    match &spec.kind {
        CovarianceKind::Identity => Ok(Matrix::identity(t, t)),
        CovarianceKind::Ar1 { decay } => {
            if !(*decay > 0.0 && *decay < 1.0) {
                return Err(Error::InvalidCovariance(format!(
                    "ar1 decay must lie in (0,1), got {decay}"
                )));
            }
            Ok(Matrix::from_fn(t, t, |i, j| decay.powi(i.abs_diff(j) as i32)))
        }
        CovarianceKind::Diagonal { values } => {
            if values.len() != t {
                return Err(Error::dim("diagonal covariance", t, values.len()));
            }
            if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
                return Err(Error::InvalidCovariance(format!(
                    "diagonal entries must be finite and nonnegative, got {v}"
                )));
            }
            Ok(Matrix::from_diagonal(&Vector::from_column_slice(values)))
        }
        CovarianceKind::Explicit { matrix } => {
            if matrix.len() != t {
                return Err(Error::dim("explicit covariance rows", t, matrix.len()));
            }
            if let Some(row) = matrix.iter().find(|r| r.len() != t) {
                return Err(Error::dim("explicit covariance columns", t, row.len()));
            }
            let m = Matrix::from_fn(t, t, |i, j| matrix[i][j]);
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidCovariance("non-finite entry".into()));
            }
            let asym = asymmetry(&m);
            if asym > SYMMETRY_TOL * m.amax().max(1.0) {
                return Err(Error::InvalidCovariance(format!(
                    "matrix not symmetric (max asymmetry {asym:e})"
                )));
            }
            if let Some(d) = m.diagonal().iter().find(|d| **d < 0.0) {
                return Err(Error::InvalidCovariance(format!("negative diagonal entry {d}")));
            }
            let m = symmetrize(&m);
            let eig = eig_sym(&m)?;
            let top = eig.values.amax();
            let min = eig.values.min();
            if min < -PSD_TOL * top {
                return Err(Error::InvalidCovariance(format!(
                    "not positive semidefinite (min eigenvalue {min:e})"
                )));
            }
            Ok(m)
        }
    }
}

fn asymmetry(m: &Matrix) -> f64 {
    (m - m.transpose()).amax()
}

pub(crate) fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

fn check_symmetric(m: &Matrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::dim("symmetric matrix", m.nrows(), m.ncols()));
    }
    let asym = asymmetry(m);
    if asym > SYMMETRY_TOL * m.amax().max(1.0) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    Ok(())
}

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted in
/// descending order; `vectors` holds the matching orthonormal eigenvectors as
/// columns.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vector,
    pub vectors: Matrix,
}

impl SymEigen {
    pub fn reconstruct(&self) -> Matrix {
        &self.vectors * Matrix::from_diagonal(&self.values) * self.vectors.transpose()
    }
}

pub fn eig_sym(m: &Matrix) -> Result<SymEigen> {
    check_symmetric(m)?;
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("eig_sym: non-finite input".into()));
    }
    let n = m.nrows();
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = Vector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SymEigen { values, vectors })
}

/// Symmetric PSD square root. Round-off negative eigenvalues are clamped to
/// zero; anything below `-PSD_TOL * ||M||` is rejected.
pub fn matrix_sqrt(m: &Matrix) -> Result<Matrix> {
    let eig = eig_sym(m)?;
    let norm = eig.values.amax();
    let min = eig.values.min();
    if min < -PSD_TOL * norm {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
            norm,
        });
    }
    let roots = eig.values.map(|v| v.max(0.0).sqrt());
    let r = &eig.vectors * Matrix::from_diagonal(&roots) * eig.vectors.transpose();
    Ok(symmetrize(&r))
}

/// Clamps negative eigenvalues of a symmetric matrix to zero.
pub(crate) fn clamp_psd(m: &Matrix) -> Result<Matrix> {
    let eig = eig_sym(m)?;
    if eig.values.min() >= 0.0 {
        return Ok(symmetrize(m));
    }
    let clamped = eig.values.map(|v| v.max(0.0));
    Ok(symmetrize(
        &(&eig.vectors * Matrix::from_diagonal(&clamped) * eig.vectors.transpose()),
    ))
}

/// Ground-truth parameters of the noisy linear teacher `y = theta^T u + eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// `T x q`
    pub theta: Matrix,
    pub sigma_noise: f64,
}

impl GroundTruth {
    pub fn new(theta: Matrix, sigma_noise: f64) -> Result<Self> {
        if !(sigma_noise >= 0.0) || !sigma_noise.is_finite() {
            return Err(Error::InvalidParam(format!(
                "noise level must be finite and nonnegative, got {sigma_noise}"
            )));
        }
        if theta.ncols() == 0 || theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam("theta must be finite with q >= 1".into()));
        }
        Ok(Self { theta, sigma_noise })
    }

    pub fn zero(t: usize, q: usize, sigma_noise: f64) -> Self {
        Self {
            theta: Matrix::zeros(t, q),
            sigma_noise,
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.nrows()
    }

    pub fn q(&self) -> usize {
        self.theta.ncols()
    }

    pub fn noise_variance(&self) -> f64 {
        self.sigma_noise * self.sigma_noise
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThetaKind {
    /// Single column `(rho^1, ..., rho^T)`.
    Decay { rho: f64 },
    /// Independent random directions, one unit-norm column per output.
    UnitRows { seed: u64 },
    Explicit { matrix: Vec<Vec<f64>> },
}

/// Builds `Theta*` (`T x q`), multiplied by `scale`.
pub fn generate_theta(kind: &ThetaKind, t: usize, q: usize, scale: f64) -> Result<Matrix> {
    if t == 0 || q == 0 {
        return Err(Error::InvalidParam("theta needs T >= 1 and q >= 1".into()));
    }
    match kind {
        ThetaKind::Decay { rho } => {
            if !(*rho > 0.0 && *rho <= 1.0) {
                return Err(Error::InvalidParam(format!("decay rho must lie in (0,1], got {rho}")));
            }
            if q != 1 {
                return Err(Error::InvalidParam("decay theta requires q = 1".into()));
            }
            Ok(Matrix::from_fn(t, 1, |i, _| scale * rho.powi(i as i32 + 1)))
        }
        ThetaKind::UnitRows { seed } => {
            let mut g = rng::stream(*seed, rng::tag::THETA);
            let mut m = Matrix::from_fn(t, q, |_, _| StandardNormal.sample(&mut g));
            for mut col in m.column_iter_mut() {
                let norm = col.norm();
                col /= norm;
            }
            Ok(m * scale)
        }
        ThetaKind::Explicit { matrix } => {
            if matrix.len() != t {
                return Err(Error::dim("explicit theta rows", t, matrix.len()));
            }
            if let Some(row) = matrix.iter().find(|r| r.len() != q) {
                return Err(Error::dim("explicit theta columns", q, row.len()));
            }
            Ok(Matrix::from_fn(t, q, |i, j| scale * matrix[i][j]))
        }
    }
}
