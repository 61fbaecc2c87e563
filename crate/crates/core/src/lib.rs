//! Spectral estimation for high-dimensional linear time series.
//!
//! The processes handled here are `X_t = sum_l A_l Z_{t-l}` where the
//! coefficient matrices and the innovation covariance share one orthonormal
//! eigenbasis. Each coordinate of the rotated process is a scalar ARMA-type
//! process indexed by a [`model::GridPoint`], and the empirical distribution of
//! those points (the joint spectral distribution) is the estimation target.
//!
//! Layout:
//!
//! - [`model`]: process families, grid points, joint spectral grids, and the
//!   closed-form per-coordinate quantities (transfer function, spectral
//!   density, autocovariances).
//! - [`synth`]: time-domain and circulant (frequency-domain) panel simulation.
//! - [`spectra`]: DFT panels, weighted integrated periodograms, dual
//!   eigenvalues, empirical Stieltjes transforms and kernels.
//! - [`lsd`]: the limiting fixed-point system for a hypothesised mixture.
//! - [`fit`]: weight-function families, the `Z` grid, the discrepancy, and the
//!   simplex-constrained optimizer.
//! - [`sdm`]: the simultaneously diagonalizable spectral density matrix
//!   estimator.
//! - [`modelsel`]: bootstrap model selection across candidate families.
//! - [`preprocess`]: log returns, factor removal, PVE, pairwise correlations.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fit;
pub mod linalg;
pub mod lsd;
pub mod model;
pub mod modelsel;
pub mod preprocess;
pub mod rng;
pub mod sdm;
pub mod spectra;
pub mod synth;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Dense matrix type used throughout the crate.
pub use faer::Mat;
