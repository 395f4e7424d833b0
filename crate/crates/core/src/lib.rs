//! Conditional LSTM-GAN for univariate time-series generation.
//!
//! The crate is organized around the life cycle of a generative run:
//!
//! * [`numerics`] — dense kernels, the stacked LSTM with backpropagation
//!   through time, the Adam optimizer, and a small symmetric eigensolver.
//! * [`model`] — generator / discriminator networks, label conditioning,
//!   and the checkpoint file format.
//! * [`trainer`] — the unrolled adversarial training loop.
//! * [`metrics`] — DTW distance, the average-similarity evaluation
//!   protocol, k-medoids exemplar selection, and nearest-sample matching.
//! * [`augment`] — the four baseline generators (noise, interpolation,
//!   extrapolation, Gaussian-HMM).
//! * [`analysis`] — signal features, canonical correlation analysis of the
//!   latent space, label-interpolation sweeps, and loading-driven control
//!   of generated signals.
//! * [`data`] — UCR-style dataset ingestion, normalization, subsampling.

pub mod analysis;
pub mod augment;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod series;
pub mod trainer;

pub use error::{Error, Result};
pub use series::Series;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
