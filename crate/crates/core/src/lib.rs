//! Ternary neural networks end to end.
//!
//! A real-valued teacher MLP is trained with stochastically firing ternary
//! neurons ([`teacher`]), converted neuron by neuron into a student whose
//! weights and activations all lie in {-1, 0, +1} ([`ternarizer`]), and then
//! executed without a single multiplication on bit-packed vectors
//! ([`runtime`]). [`hwmodel`] estimates throughput and latency of the layered
//! one-item-per-cycle hardware pipeline that runs such networks.
//!
//! - [`math`] -- dense matrices, seeded RNG, activation functions
//! - [`data`] -- MNIST IDX loading, binarization, splits, synthetic blobs
//! - [`teacher`] -- teacher MLP, stochastic firing, SGD training, staggered retraining
//! - [`ternarizer`] -- weight-threshold search, KDE output thresholds, network compilation
//! - [`runtime`] -- packed ternary vectors, inference engines, the `TNN1` container
//! - [`hwmodel`] -- analytic pipeline cost model

pub mod data;
pub mod error;
pub mod hwmodel;
pub mod math;
pub mod runtime;
pub mod teacher;
pub mod ternarizer;

pub use error::{Error, FormatError, IdxError, Result};
pub use math::{Activation, Matrix, Rng};

/// Library version string, read from `Cargo.toml` at compile time.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
