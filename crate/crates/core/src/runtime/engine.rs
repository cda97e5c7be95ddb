use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};

use super::model::{TernaryLayer, TernaryMlp};
use super::packed::PackedTernaryVec;

/// The integer operations the inference path is allowed to use.
///
/// Running inference through [`Counting`] tallies every operation, which is
/// how the multiplication-free property is checked.
pub trait Arith {
    fn add(&mut self, a: i32, b: i32) -> i32;
    fn sub(&mut self, a: i32, b: i32) -> i32;
    fn and(&mut self, a: u64, b: u64) -> u64;
    fn popcount(&mut self, w: u64) -> i32;
    fn less(&mut self, a: i32, b: i32) -> bool;
    fn mul(&mut self, a: i32, b: i32) -> i32;
}

/// Uninstrumented arithmetic.
#[derive(Clone, Copy, Debug, Default)]
pub struct Plain;

impl Arith for Plain {
    #[inline(always)]
    fn add(&mut self, a: i32, b: i32) -> i32 {
        a + b
    }
    #[inline(always)]
    fn sub(&mut self, a: i32, b: i32) -> i32 {
        a - b
    }
    #[inline(always)]
    fn and(&mut self, a: u64, b: u64) -> u64 {
        a & b
    }
    #[inline(always)]
    fn popcount(&mut self, w: u64) -> i32 {
        w.count_ones() as i32
    }
    #[inline(always)]
    fn less(&mut self, a: i32, b: i32) -> bool {
        a < b
    }
    #[inline(always)]
    fn mul(&mut self, a: i32, b: i32) -> i32 {
        a * b
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub adds: u64,
    pub subs: u64,
    pub ands: u64,
    pub popcounts: u64,
    pub compares: u64,
    pub muls: u64,
}

/// Arithmetic that counts what it executes.
#[derive(Clone, Copy, Debug, Default)]
pub struct Counting {
    pub counts: OpCounts,
}

impl Arith for Counting {
    fn add(&mut self, a: i32, b: i32) -> i32 {
        self.counts.adds += 1;
        a + b
    }
    fn sub(&mut self, a: i32, b: i32) -> i32 {
        self.counts.subs += 1;
        a - b
    }
    fn and(&mut self, a: u64, b: u64) -> u64 {
        self.counts.ands += 1;
        a & b
    }
    fn popcount(&mut self, w: u64) -> i32 {
        self.counts.popcounts += 1;
        w.count_ones() as i32
    }
    fn less(&mut self, a: i32, b: i32) -> bool {
        self.counts.compares += 1;
        a < b
    }
    fn mul(&mut self, a: i32, b: i32) -> i32 {
        self.counts.muls += 1;
        a * b
    }
}

pub fn ternary_dot_with<A: Arith>(a: &mut A, w: &PackedTernaryVec, x: &PackedTernaryVec) -> Result<i32> {
    if w.len() != x.len() {
        return Err(Error::DimensionMismatch(format!(
            "dot of lengths {} and {}",
            w.len(),
            x.len()
        )));
    }
    Ok(dot_unchecked(a, w, x))
}

#[inline]
pub(crate) fn dot_unchecked<A: Arith>(a: &mut A, w: &PackedTernaryVec, x: &PackedTernaryVec) -> i32 {
    let (wp, wm) = (w.plus_mask(), w.minus_mask());
    let (xp, xm) = (x.plus_mask(), x.minus_mask());
    let mut acc = 0;
    for k in 0..wp.len() {
        let agree = a.and(wp[k], xp[k]);
        let agree = a.popcount(agree);
        acc = a.add(acc, agree);
        let agree = a.and(wm[k], xm[k]);
        let agree = a.popcount(agree);
        acc = a.add(acc, agree);
        let differ = a.and(wp[k], xm[k]);
        let differ = a.popcount(differ);
        acc = a.sub(acc, differ);
        let differ = a.and(wm[k], xp[k]);
        let differ = a.popcount(differ);
        acc = a.sub(acc, differ);
    }
    acc
}

/// `−1` below `b_lo`, `+1` above `b_hi`, 0 otherwise (both bounds strict).
#[inline]
pub fn step_activation(y: i32, b_lo: i32, b_hi: i32) -> i8 {
    step_with(&mut Plain, y, b_lo, b_hi)
}

#[inline]
fn step_with<A: Arith>(a: &mut A, y: i32, b_lo: i32, b_hi: i32) -> i8 {
    if a.less(y, b_lo) {
        -1
    } else if a.less(b_hi, y) {
        1
    } else {
        0
    }
}

pub(crate) fn layer_forward_with<A: Arith>(a: &mut A, layer: &TernaryLayer, x: &PackedTernaryVec) -> PackedTernaryVec {
    let n = layer.len();
    let mut plus = vec![0u64; n.div_ceil(64)];
    let mut minus = vec![0u64; n.div_ceil(64)];
    for (i, row) in layer.rows().iter().enumerate() {
        let y = dot_unchecked(a, row, x);
        match step_with(a, y, layer.b_lo()[i], layer.b_hi()[i]) {
            1 => plus[i / 64] |= 1 << (i % 64),
            -1 => minus[i / 64] |= 1 << (i % 64),
            _ => {}
        }
    }
    PackedTernaryVec::from_masks(n, plus, minus).expect("disjoint by construction")
}

/// Class index for one packed input: argmax of the output layer's transfer
/// values, ties to the lowest index.
pub fn infer_with<A: Arith>(a: &mut A, model: &TernaryMlp, x: &PackedTernaryVec) -> Result<usize> {
    if x.len() != model.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "input of length {} for a model with input dim {}",
            x.len(),
            model.input_dim()
        )));
    }
    let layers = model.layers();
    let (output, hidden) = layers.split_last().expect("model has an output layer");
    let mut cur = x.clone();
    for layer in hidden {
        cur = layer_forward_with(a, layer, &cur);
    }
    let mut best = 0;
    let mut best_y = dot_unchecked(a, &output.rows()[0], &cur);
    for (i, row) in output.rows().iter().enumerate().skip(1) {
        let y = dot_unchecked(a, row, &cur);
        if a.less(best_y, y) {
            best = i;
            best_y = y;
        }
    }
    Ok(best)
}

pub fn infer(model: &TernaryMlp, x: &PackedTernaryVec) -> Result<usize> {
    infer_with(&mut Plain, model, x)
}

/// Reference forward pass over unpacked values with ordinary multiplies.
pub fn infer_naive(model: &TernaryMlp, x: &[i8]) -> Result<usize> {
    if x.len() != model.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "input of length {} for a model with input dim {}",
            x.len(),
            model.input_dim()
        )));
    }
    let mut cur = x.to_vec();
    let layers = model.layers();
    let transfer = |layer: &TernaryLayer, cur: &[i8]| -> Vec<i32> {
        layer
            .rows()
            .iter()
            .map(|row| row.unpack().iter().zip(cur).map(|(&w, &v)| w as i32 * v as i32).sum())
            .collect()
    };
    for layer in &layers[..layers.len() - 1] {
        let y = transfer(layer, &cur);
        cur = y
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                if v < layer.b_lo()[i] {
                    -1
                } else if v > layer.b_hi()[i] {
                    1
                } else {
                    0
                }
            })
            .collect();
    }
    let y = transfer(&layers[layers.len() - 1], &cur);
    let mut best = 0;
    for (i, &v) in y.iter().enumerate() {
        if v > y[best] {
            best = i;
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub predictions: Vec<usize>,
    pub correct: usize,
}

impl Evaluation {
    pub fn accuracy(&self) -> f64 {
        if self.predictions.is_empty() {
            0.0
        } else {
            self.correct as f64 / self.predictions.len() as f64
        }
    }
}

/// Classifies every sample, split across the current rayon pool.
pub fn evaluate(model: &TernaryMlp, ds: &Dataset) -> Result<Evaluation> {
    if ds.input_dim() != model.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "dataset input dim {} for model input dim {}",
            ds.input_dim(),
            model.input_dim()
        )));
    }
    let predictions = (0..ds.len())
        .into_par_iter()
        .map(|i| infer(model, &PackedTernaryVec::pack(ds.input(i))?))
        .collect::<Result<Vec<_>>>()?;
    let correct = predictions
        .iter()
        .enumerate()
        .filter(|&(i, &p)| p == ds.label(i))
        .count();
    Ok(Evaluation { predictions, correct })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Rng;

    fn random_model(rng: &mut Rng, arch: &[usize]) -> TernaryMlp {
        let layers = arch
            .windows(2)
            .map(|w| {
                let rows: Vec<Vec<i8>> = (0..w[1])
                    .map(|_| (0..w[0]).map(|_| rng.below(3) as i8 - 1).collect())
                    .collect();
                let lo: Vec<i32> = (0..w[1]).map(|_| -(rng.below(4) as i32)).collect();
                let hi: Vec<i32> = lo.iter().map(|&l| l + rng.below(5) as i32).collect();
                TernaryLayer::from_rows(&rows, lo, hi).unwrap()
            })
            .collect();
        TernaryMlp::new(layers).unwrap()
    }

    #[test]
    fn step_boundaries() {
        assert_eq!(step_activation(-2, -2, 3), 0);
        assert_eq!(step_activation(3, -2, 3), 0);
        assert_eq!(step_activation(4, -2, 3), 1);
        assert_eq!(step_activation(-3, -2, 3), -1);
        for (lo, hi) in [(-1, 1), (0, 0), (-3, 2)] {
            for y in -5..=5 {
                let want = if y < lo {
                    -1
                } else if y > hi {
                    1
                } else {
                    0
                };
                assert_eq!(step_activation(y, lo, hi), want);
            }
        }
    }

    #[test]
    fn packed_and_naive_paths_agree_without_multiplying() {
        let mut rng = Rng::new(12);
        let model = random_model(&mut rng, &[70, 20, 9, 4]);
        for _ in 0..300 {
            let x: Vec<i8> = (0..70).map(|_| rng.below(3) as i8 - 1).collect();
            let packed = PackedTernaryVec::pack(&x).unwrap();
            let mut c = Counting::default();
            let got = infer_with(&mut c, &model, &packed).unwrap();
            assert_eq!(got, infer_naive(&model, &x).unwrap());
            assert_eq!(c.counts.muls, 0);
            assert!(c.counts.popcounts > 0);
        }
    }

    #[test]
    fn single_output_is_always_class_zero() {
        let mut rng = Rng::new(13);
        let model = random_model(&mut rng, &[10, 5, 1]);
        for _ in 0..20 {
            let x: Vec<i8> = (0..10).map(|_| rng.below(3) as i8 - 1).collect();
            assert_eq!(infer(&model, &PackedTernaryVec::pack(&x).unwrap()).unwrap(), 0);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let mut rng = Rng::new(14);
        let model = random_model(&mut rng, &[10, 3]);
        assert!(infer(&model, &PackedTernaryVec::zeros(9)).is_err());
        assert!(infer_naive(&model, &[0; 11]).is_err());
    }
}
