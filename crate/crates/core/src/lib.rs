//! Truncated Fock-space simulation of a single-photon Mach-Zehnder
//! interferometer whose two arms pass through a sum-frequency converter,
//! so that the interferometer closes at two different wavelengths.
//!
//! The crate is layered bottom-up:
//!
//! * [`fock`]: modes, truncated multimode bases, state vectors and dense unitaries.
//! * [`elements`]: beam splitters, phase shifters, the pairwise frequency
//!   converter and an independent matrix-exponential oracle.
//! * [`physics`]: wavelength algebra, conversion efficiency versus pump
//!   intensity, mirror phase map and planar phase matching.
//! * [`detection`]: threshold photodetection sampling, coincidence counting
//!   and g²(0) estimators.
//! * [`interferometer`]: the two-wavelength interferometer and the
//!   polarization-entangled pair network.
//! * [`experiment`]: declarative configs, runners and result files.

// `!(x < tol)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detection;
pub mod elements;
pub mod error;
pub mod experiment;
pub mod fock;
pub mod interferometer;
mod linalg;
pub mod physics;

pub use error::{Error, Result};
pub use num_complex::Complex64;
