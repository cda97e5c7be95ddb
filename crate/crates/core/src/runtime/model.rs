use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, FormatError, Result};

use super::container::{decode_meta, encode_meta, ByteReader, ByteWriter, Container};
use super::engine::{dot_unchecked, layer_forward_with, Plain};
use super::packed::{words_for, PackedTernaryVec};

/// One layer of packed ternary neurons with integer firing thresholds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TernaryLayer {
    fan_in: usize,
    rows: Vec<PackedTernaryVec>,
    b_lo: Vec<i32>,
    b_hi: Vec<i32>,
}

impl TernaryLayer {
    pub fn new(fan_in: usize, rows: Vec<PackedTernaryVec>, b_lo: Vec<i32>, b_hi: Vec<i32>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("ternary layer without neurons".into()));
        }
        if b_lo.len() != rows.len() || b_hi.len() != rows.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} neurons but {} / {} thresholds",
                rows.len(),
                b_lo.len(),
                b_hi.len()
            )));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != fan_in) {
            return Err(Error::DimensionMismatch(format!(
                "row of length {} in a layer with fan-in {fan_in}",
                r.len()
            )));
        }
        if let Some(i) = (0..rows.len()).find(|&i| b_lo[i] > b_hi[i]) {
            return Err(Error::InvalidArgument(format!(
                "neuron {i} has b_lo {} > b_hi {}",
                b_lo[i], b_hi[i]
            )));
        }
        Ok(TernaryLayer {
            fan_in,
            rows,
            b_lo,
            b_hi,
        })
    }

    pub fn from_rows(rows: &[Vec<i8>], b_lo: Vec<i32>, b_hi: Vec<i32>) -> Result<Self> {
        let fan_in = rows.first().map_or(0, Vec::len);
        let packed = rows
            .iter()
            .map(|r| PackedTernaryVec::pack(r))
            .collect::<Result<Vec<_>>>()?;
        TernaryLayer::new(fan_in, packed, b_lo, b_hi)
    }

    /// Number of neurons.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.fan_in
    }

    pub fn rows(&self) -> &[PackedTernaryVec] {
        &self.rows
    }

    pub fn b_lo(&self) -> &[i32] {
        &self.b_lo
    }

    pub fn b_hi(&self) -> &[i32] {
        &self.b_hi
    }

    fn check(&self, x: &PackedTernaryVec) -> Result<()> {
        if x.len() != self.fan_in {
            return Err(Error::DimensionMismatch(format!(
                "input of length {} for fan-in {}",
                x.len(),
                self.fan_in
            )));
        }
        Ok(())
    }

    /// Integer transfer values `W x`.
    pub fn transfer(&self, x: &PackedTernaryVec) -> Result<Vec<i32>> {
        self.check(x)?;
        Ok(self.rows.iter().map(|r| dot_unchecked(&mut Plain, r, x)).collect())
    }

    /// Thresholded outputs.
    pub fn forward(&self, x: &PackedTernaryVec) -> Result<PackedTernaryVec> {
        self.check(x)?;
        Ok(layer_forward_with(&mut Plain, self, x))
    }

    pub fn nonzero_weights(&self) -> usize {
        self.rows.iter().map(PackedTernaryVec::nnz).sum()
    }
}

/// Deployed ternary network. The last layer is the output layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TernaryMlp {
    layers: Vec<TernaryLayer>,
    meta: BTreeMap<String, String>,
}

impl TernaryMlp {
    pub fn new(layers: Vec<TernaryLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("ternary network without layers".into()));
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[1].input_dim() != w[0].len() {
                return Err(Error::DimensionMismatch(format!(
                    "layer {} expects {} inputs, layer {i} has {} neurons",
                    i + 1,
                    w[1].input_dim(),
                    w[0].len()
                )));
            }
        }
        Ok(TernaryMlp {
            layers,
            meta: BTreeMap::new(),
        })
    }

    /// Provenance metadata stored alongside the weights.
    pub fn meta(&self) -> &BTreeMap<String, String> {
        &self.meta
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.meta.insert(key.into(), value.into());
    }

    pub fn layers(&self) -> &[TernaryLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.layers[self.layers.len() - 1].len()
    }

    pub fn arch(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(TernaryLayer::len))
            .collect()
    }

    pub fn num_weights(&self) -> usize {
        self.layers.iter().map(|l| l.len() * l.input_dim()).sum()
    }

    /// Fraction of weights that are zero.
    pub fn sparsity(&self) -> f64 {
        let total = self.num_weights();
        if total == 0 {
            return 0.0;
        }
        let nonzero: usize = self.layers.iter().map(TernaryLayer::nonzero_weights).sum();
        1.0 - nonzero as f64 / total as f64
    }

    pub fn to_container(&self) -> Container {
        let mut meta = self.meta.clone();
        meta.insert("kind".into(), "ternary-mlp".into());
        let mut c = Container::new();
        c.push(b"META", encode_meta(&meta));
        let mut dims = ByteWriter::new();
        dims.u32(self.layers.len() as u32);
        for l in &self.layers {
            dims.u32(l.input_dim() as u32).u32(l.len() as u32);
        }
        c.push(b"DIMS", dims.finish());
        for l in &self.layers {
            let mut m = ByteWriter::new();
            for row in &l.rows {
                for &w in row.plus_mask().iter().chain(row.minus_mask()) {
                    m.u64(w);
                }
            }
            c.push(b"PMSK", m.finish());
            let mut t = ByteWriter::new();
            for i in 0..l.len() {
                t.i32(l.b_lo[i]).i32(l.b_hi[i]);
            }
            c.push(b"THRS", t.finish());
        }
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let mut meta = decode_meta(c.require(b"META")?)?;
        if meta.remove("kind").as_deref() != Some("ternary-mlp") {
            return Err(FormatError::Malformed("container does not hold a ternary network".into()).into());
        }
        let mut dims = ByteReader::new(c.require(b"DIMS")?, "DIMS");
        let n = dims.u32()? as usize;
        let shapes = (0..n)
            .map(|_| Ok((dims.u32()? as usize, dims.u32()? as usize)))
            .collect::<Result<Vec<_>, FormatError>>()?;
        dims.finish()?;
        let masks: Vec<&[u8]> = c.all(b"PMSK").collect();
        let thresholds: Vec<&[u8]> = c.all(b"THRS").collect();
        if masks.len() != n || thresholds.len() != n {
            return Err(FormatError::Malformed("layer sections disagree with DIMS".into()).into());
        }
        let malformed = |e: Error| -> Error { FormatError::Malformed(e.to_string()).into() };
        let mut layers = Vec::with_capacity(n);
        for (l, &(fan_in, fan_out)) in shapes.iter().enumerate() {
            let words = words_for(fan_in);
            let mut r = ByteReader::new(masks[l], "PMSK");
            let mut rows = Vec::with_capacity(fan_out);
            for _ in 0..fan_out {
                let plus = (0..words).map(|_| r.u64()).collect::<Result<Vec<_>, _>>()?;
                let minus = (0..words).map(|_| r.u64()).collect::<Result<Vec<_>, _>>()?;
                rows.push(PackedTernaryVec::from_masks(fan_in, plus, minus).map_err(malformed)?);
            }
            r.finish()?;
            let mut t = ByteReader::new(thresholds[l], "THRS");
            let mut lo = Vec::with_capacity(fan_out);
            let mut hi = Vec::with_capacity(fan_out);
            for _ in 0..fan_out {
                lo.push(t.i32()?);
                hi.push(t.i32()?);
            }
            t.finish()?;
            layers.push(TernaryLayer::new(fan_in, rows, lo, hi).map_err(malformed)?);
        }
        let mut model = TernaryMlp::new(layers).map_err(malformed)?;
        model.meta = meta;
        Ok(model)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.to_container().to_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        TernaryMlp::from_container(&Container::from_bytes(bytes)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container().write(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        TernaryMlp::from_container(&Container::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> TernaryMlp {
        let l0 = TernaryLayer::from_rows(&[vec![1, 0, -1], vec![0, 1, 1]], vec![-1, 0], vec![1, 0]).unwrap();
        let l1 = TernaryLayer::from_rows(&[vec![1, -1], vec![-1, 1]], vec![0, 0], vec![0, 0]).unwrap();
        let mut m = TernaryMlp::new(vec![l0, l1]).unwrap();
        m.set_meta("teacher_sha256", "abc");
        m
    }

    #[test]
    fn bytes_round_trip() {
        let m = tiny();
        let bytes = m.to_bytes();
        let back = TernaryMlp::from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn sparsity_counts_zero_weights() {
        assert!((tiny().sparsity() - 2.0 / 10.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_inverted_thresholds_and_bad_chains() {
        assert!(TernaryLayer::from_rows(&[vec![1]], vec![1], vec![0]).is_err());
        let a = TernaryLayer::from_rows(&[vec![1, 1]], vec![0], vec![0]).unwrap();
        let b = TernaryLayer::from_rows(&[vec![1, 1]], vec![0], vec![0]).unwrap();
        assert!(TernaryMlp::new(vec![a, b]).is_err());
    }
}
