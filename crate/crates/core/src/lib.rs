//! Gridless MIMO channel estimation with frequency-selective atomic norm
//! minimization (FS-ANM).
//!
//! The crate is organised bottom-up:
//!
//! * [`signal_model`]: steering vectors, random sparse channels, pilot
//!   measurements and the mapping from angular priors to frequency bands.
//! * [`fs_toeplitz`]: the band polynomial, one- and two-level Toeplitz
//!   operators, the band-constraint matrices and Vandermonde retrieval.
//! * [`solver`]: an ADMM solver for the regularized Toeplitz SDPs.
//! * [`estimators`]: FS-ANM, plain ANM and OMP channel estimators plus NMSE.

pub mod error;
pub mod estimators;
pub mod fs_toeplitz;
pub mod linalg;
pub mod signal_model;
pub mod solver;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub(crate) const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Complex zero/one shorthands.
pub(crate) const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const C_ONE: Complex64 = Complex64::new(1.0, 0.0);
