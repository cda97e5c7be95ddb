//! Dense linear algebra, seeded random numbers and activation functions.

mod activation;
mod matrix;
mod rng;

pub use activation::Activation;
pub use matrix::{matmul, Matrix};
pub use rng::Rng;
