//! Multiplication-free inference over bit-packed ternary networks.

pub mod container;
mod engine;
mod model;
mod packed;

pub use engine::{
    evaluate, infer, infer_naive, infer_with, step_activation, ternary_dot_with, Arith, Counting, Evaluation, OpCounts,
    Plain,
};
pub use model::{TernaryLayer, TernaryMlp};
pub use packed::{ternary_dot, PackedTernaryVec};
