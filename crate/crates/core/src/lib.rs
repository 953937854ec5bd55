//! Asymptotic generalization risk of ridge readouts trained on fixed feature
//! representations, with a spectral specialization to linear echo state
//! networks and a Monte Carlo engine that checks every prediction.
//!
//! The crate is organised bottom-up:
//!
//! * [`covariance`] builds input covariances, their square roots and
//!   ground-truth parameters.
//! * [`representation`] samples reservoirs and evaluates feature maps.
//! * [`moments`] produces the population moments consumed by the theory.
//! * [`rmt`] solves the self-consistent equations and evaluates the
//!   asymptotic risk formulas.
//! * [`empirical`] simulates datasets, fits ridge readouts and estimates risk.
//! * [`experiments`] runs the double-descent, phase-diagram and convergence
//!   studies.
//! * [`config`], [`output`] and [`cli`] back the `rmt-repr` binary.

pub mod cli;
pub mod config;
pub mod covariance;
pub mod empirical;
pub mod error;
pub mod experiments;
pub mod moments;
pub mod output;
pub mod representation;
pub mod rmt;
pub mod rng;

pub use error::{Error, Result};

pub type Matrix = nalgebra::DMatrix<f64>;
pub type Vector = nalgebra::DVector<f64>;
