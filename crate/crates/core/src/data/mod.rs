//! Datasets of ternary input vectors.

mod dataset;
mod idx;
mod synth;

pub use dataset::{split, Dataset};
pub use idx::{binarize_threshold, load_mnist_idx, parse_idx_images, parse_idx_labels, GrayscaleSet};
pub use synth::synth_blobs;
