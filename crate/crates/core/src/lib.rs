//! Spectral statistics of sample correlation and covariance matrices.
//!
//! * [`mp`]: the Marčenko–Pastur family.
//! * [`data`], [`eigen`], [`distance`]: matrix statistics, spectra and
//!   distances between distribution functions.
//! * [`models`]: equi-correlated and factor-model samplers.
//! * [`theory`]: the `λ₁(C)/N` estimator, fitted MP law, CLT normalizations,
//!   phase-transition classification and eigenvalue clipping.
//! * [`finance`]: returns datasets, sector summaries, regression, heatmaps.
//! * [`harness`]: seeded parallel Monte Carlo experiments.

pub mod data;
pub mod distance;
pub mod eigen;
pub mod finance;
pub mod harness;
pub mod models;
pub mod mp;
mod quad;
pub mod rng;
pub mod theory;

pub use data::{DataMatrix, SpectraError};
pub use distance::{kolmogorov_distance, levy_distance, DistributionFunction, Esd};
pub use mp::MpParams;
