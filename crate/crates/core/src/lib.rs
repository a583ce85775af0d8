//! Rain-distortion modelling, Hermitian-Toeplitz covariance calibration and
//! subspace direction-of-arrival estimation for uniform linear arrays.
//!
//! The processing chain is: draw per-element complex gains from a
//! decorrelation model of the rain medium ([`distortion`]), synthesize array
//! snapshots and their sample covariance ([`array`]), project the covariance
//! onto the Hermitian Toeplitz matrices and split it into phase and
//! magnitude ([`calibration`]), then estimate the direction with MUSIC or
//! root-MUSIC ([`doa`]). [`experiment`] runs seeded Monte Carlo studies of
//! that chain and [`io`] reads and writes the data files.

pub mod array;
pub mod calibration;
pub mod config;
pub mod distortion;
pub mod doa;
pub mod error;
pub mod experiment;
pub mod io;
pub mod linalg;
pub mod rng;

pub use error::{Error, Result};
