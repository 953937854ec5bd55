//! Population second moments `Sigma_z = E[z z^T]` and `Sigma_uz = E[u z^T]`.

use rayon::prelude::*;

use crate::covariance::{clamp_psd, matrix_sqrt, symmetrize};
use crate::representation::{apply_feature_map, FeatureMap};
use crate::{rng, Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    ClosedForm,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone)]
pub struct PopulationMoments {
    /// `T x T`
    pub sigma_u: Matrix,
    /// `n x n`
    pub sigma_z: Matrix,
    /// `T x n`
    pub sigma_uz: Matrix,
    pub provenance: Provenance,
}

/// Exact moments of `z = A u`: `Sigma_z = A Sigma_u A^T`, `Sigma_uz = Sigma_u A^T`.
pub fn moments_linear_map(sigma_u: &Matrix, map: &Matrix) -> Result<PopulationMoments> {
    let t = sigma_u.nrows();
    if !sigma_u.is_square() {
        return Err(Error::dim("moments sigma_u", t, sigma_u.ncols()));
    }
    if map.ncols() != t {
        return Err(Error::dim("moments map columns", t, map.ncols()));
    }
    let sigma_uz = sigma_u * map.transpose();
    let sigma_z = symmetrize(&(map * &sigma_uz));
    Ok(PopulationMoments {
        sigma_u: sigma_u.clone(),
        sigma_z,
        sigma_uz,
        provenance: Provenance::ClosedForm,
    })
}

/// Closed-form moments for any linear [`FeatureMap`].
pub fn moments_for_map(sigma_u: &Matrix, map: &FeatureMap) -> Result<PopulationMoments> {
    match map {
        FeatureMap::Identity { dim } => {
            if *dim != sigma_u.nrows() {
                return Err(Error::dim("identity map", sigma_u.nrows(), *dim));
            }
            Ok(PopulationMoments {
                sigma_u: sigma_u.clone(),
                sigma_z: sigma_u.clone(),
                sigma_uz: sigma_u.clone(),
                provenance: Provenance::ClosedForm,
            })
        }
        _ => {
            let a = map
                .linear_matrix()
                .ok_or_else(|| Error::InvalidParam("map has no closed-form moments; use Monte Carlo".into()))?;
            moments_linear_map(sigma_u, &a)
        }
    }
}

pub const MOMENT_BLOCK: usize = 1000;
pub const MIN_MOMENT_SAMPLES: usize = 1000;

/// Plain (uncentered) empirical second moments over `samples` fresh draws
/// `u ~ N(0, Sigma_u)`.
///
/// Draws are split into blocks of [`MOMENT_BLOCK`] columns; block `b` reads
/// stream `(seed, derive(MOMENTS, b))` and partial sums are reduced in block
/// order, so the result does not depend on the thread count.
pub fn moments_monte_carlo(map: &FeatureMap, sigma_u: &Matrix, samples: usize, seed: u64) -> Result<PopulationMoments> {
    if samples < MIN_MOMENT_SAMPLES {
        return Err(Error::InvalidParam(format!(
            "Monte Carlo moments need at least {MIN_MOMENT_SAMPLES} samples, got {samples}"
        )));
    }
    let t = sigma_u.nrows();
    if map.input_dim() != t {
        return Err(Error::dim("moments map input", t, map.input_dim()));
    }
    let root = matrix_sqrt(sigma_u)?;
    let n = map.n_features();
    let blocks = samples.div_ceil(MOMENT_BLOCK);

    let partials: Vec<Result<(Matrix, Matrix)>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let cols = MOMENT_BLOCK.min(samples - b * MOMENT_BLOCK);
            let mut g = rng::stream(seed, rng::derive(rng::tag::MOMENTS, b as u64));
            let u = &root * rng::standard_normal_matrix(&mut g, t, cols);
            let z = apply_feature_map(map, &u)?;
            Ok((&z * z.transpose(), &u * z.transpose()))
        })
        .collect();

    let mut zz = Matrix::zeros(n, n);
    let mut uz = Matrix::zeros(t, n);
    for p in partials {
        let (a, b) = p?;
        zz += a;
        uz += b;
    }
    let inv = 1.0 / samples as f64;
    Ok(PopulationMoments {
        sigma_u: sigma_u.clone(),
        sigma_z: clamp_psd(&symmetrize(&(zz * inv)))?,
        sigma_uz: uz * inv,
        provenance: Provenance::MonteCarlo { samples, seed },
    })
}
