use super::Dataset;
use crate::error::{Error, Result};
use crate::math::Rng;

/// Per-coordinate noise scale. Centroids differ by at least 1 in some
/// coordinate, i.e. by at least 6 noise standard deviations.
const NOISE: f64 = 1.0 / 6.0;
/// Coordinates inside (-BAND, BAND) ternarize to 0.
const BAND: f64 = 0.5;

/// Ternarized Gaussian blobs around one distinct ternary centroid per class.
pub fn synth_blobs(rng: &mut Rng, n: usize, dim: usize, classes: usize) -> Result<Dataset> {
    if n == 0 || dim == 0 || classes == 0 {
        return Err(Error::InvalidArgument(format!(
            "synth_blobs needs positive sizes, got n={n} dim={dim} classes={classes}"
        )));
    }
    let centroids = distinct_centroids(rng, dim, classes);
    let mut inputs = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let label = rng.below(classes);
        for &c in &centroids[label * dim..(label + 1) * dim] {
            let v = c as f64 + NOISE * rng.normal();
            inputs.push(if v > BAND {
                1
            } else if v < -BAND {
                -1
            } else {
                0
            });
        }
        labels.push(label as u16);
    }
    Dataset::new(inputs, labels, classes, dim)
}

fn distinct_centroids(rng: &mut Rng, dim: usize, classes: usize) -> Vec<i8> {
    // prefer full-magnitude ±1 centroids; fall back to {-1,0,1} when 2^dim is too small
    let binary_room = dim >= 63 || (1u64 << dim) >= classes as u64;
    let mut out: Vec<i8> = Vec::with_capacity(classes * dim);
    let mut attempts = 0;
    while out.len() < classes * dim {
        let candidate: Vec<i8> = (0..dim)
            .map(|_| {
                if binary_room {
                    if rng.below(2) == 0 {
                        -1
                    } else {
                        1
                    }
                } else {
                    rng.below(3) as i8 - 1
                }
            })
            .collect();
        attempts += 1;
        let duplicate = out.chunks(dim).any(|c| c == candidate.as_slice());
        // 3^dim < classes cannot be made distinct; accept duplicates eventually
        if !duplicate || attempts > 10_000 {
            out.extend(candidate);
        }
    }
    out
}
