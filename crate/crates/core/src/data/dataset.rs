use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, FormatError, Result};
use crate::runtime::container::{decode_meta, encode_meta, ByteReader, ByteWriter, Container};

/// Labeled ternary input vectors, stored row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    inputs: Vec<i8>,
    labels: Vec<u16>,
    num_classes: usize,
    input_dim: usize,
}

impl Dataset {
    pub fn new(inputs: Vec<i8>, labels: Vec<u16>, num_classes: usize, input_dim: usize) -> Result<Self> {
        if inputs.len() != labels.len() * input_dim {
            return Err(Error::DimensionMismatch(format!(
                "{} input values for {} samples of dimension {input_dim}",
                inputs.len(),
                labels.len()
            )));
        }
        if let Some(i) = inputs.iter().position(|v| !(-1..=1).contains(v)) {
            return Err(Error::InvalidArgument(format!(
                "input value {} at flat index {i} is not ternary",
                inputs[i]
            )));
        }
        if let Some(i) = labels.iter().position(|&l| l as usize >= num_classes) {
            return Err(Error::InvalidArgument(format!(
                "label {} at index {i} exceeds {num_classes} classes",
                labels[i]
            )));
        }
        Ok(Dataset {
            inputs,
            labels,
            num_classes,
            input_dim,
        })
    }

    pub fn empty(num_classes: usize, input_dim: usize) -> Self {
        Dataset {
            inputs: Vec::new(),
            labels: Vec::new(),
            num_classes,
            input_dim,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    #[inline]
    pub fn input(&self, i: usize) -> &[i8] {
        &self.inputs[i * self.input_dim..(i + 1) * self.input_dim]
    }

    #[inline]
    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn inputs(&self) -> &[i8] {
        &self.inputs
    }

    /// Samples `start..end`, in order.
    pub fn slice(&self, start: usize, end: usize) -> Dataset {
        Dataset {
            inputs: self.inputs[start * self.input_dim..end * self.input_dim].to_vec(),
            labels: self.labels[start..end].to_vec(),
            num_classes: self.num_classes,
            input_dim: self.input_dim,
        }
    }

    /// The first `n` samples (or all of them when `n` exceeds the length).
    pub fn take(&self, n: usize) -> Dataset {
        self.slice(0, n.min(self.len()))
    }

    /// Samples at the given indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut inputs = Vec::with_capacity(indices.len() * self.input_dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            inputs.extend_from_slice(self.input(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            inputs,
            labels,
            num_classes: self.num_classes,
            input_dim: self.input_dim,
        }
    }

    /// Replaces every input with `f(input)`, keeping labels.
    pub fn map_inputs(&self, output_dim: usize, mut f: impl FnMut(&[i8]) -> Vec<i8>) -> Result<Dataset> {
        let mut inputs = Vec::with_capacity(self.len() * output_dim);
        for i in 0..self.len() {
            inputs.extend(f(self.input(i)));
        }
        Dataset::new(inputs, self.labels.clone(), self.num_classes, output_dim)
    }

    pub fn to_container(&self) -> Container {
        let mut meta = BTreeMap::new();
        meta.insert("kind".into(), "dataset".into());
        let mut c = Container::new();
        c.push(b"META", encode_meta(&meta));
        let mut dims = ByteWriter::new();
        dims.u64(self.len() as u64)
            .u32(self.input_dim as u32)
            .u32(self.num_classes as u32);
        c.push(b"DIMS", dims.finish());
        c.push(b"INPT", self.inputs.iter().map(|&v| v as u8).collect());
        let mut labels = ByteWriter::new();
        for &l in &self.labels {
            labels.u32(l as u32);
        }
        c.push(b"LABL", labels.finish());
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let meta = decode_meta(c.require(b"META")?)?;
        if meta.get("kind").map(String::as_str) != Some("dataset") {
            return Err(FormatError::Malformed("container does not hold a dataset".into()).into());
        }
        let mut dims = ByteReader::new(c.require(b"DIMS")?, "DIMS");
        let len = dims.u64()? as usize;
        let input_dim = dims.u32()? as usize;
        let num_classes = dims.u32()? as usize;
        dims.finish()?;
        let raw = c.require(b"INPT")?;
        if raw.len() != len * input_dim {
            return Err(FormatError::Malformed("INPT length disagrees with DIMS".into()).into());
        }
        let mut lr = ByteReader::new(c.require(b"LABL")?, "LABL");
        let mut labels = Vec::with_capacity(len);
        for _ in 0..len {
            labels.push(lr.u32()? as u16);
        }
        lr.finish()?;
        let inputs = raw.iter().map(|&b| b as i8).collect();
        Dataset::new(inputs, labels, num_classes, input_dim)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container().write(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Dataset::from_container(&Container::read(path)?)
    }
}

/// Ordered split: the first `train` samples and the last `validation` samples.
pub fn split(ds: &Dataset, train: usize, validation: usize) -> Result<(Dataset, Dataset)> {
    let total = train
        .checked_add(validation)
        .filter(|&t| t <= ds.len())
        .ok_or_else(|| {
            Error::InvalidArgument(format!("cannot split {} samples into {train} + {validation}", ds.len()))
        })?;
    debug_assert!(total <= ds.len());
    Ok((ds.slice(0, train), ds.slice(ds.len() - validation, ds.len())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> Dataset {
        let inputs = (0..n * 3).map(|i| (i % 3) as i8 - 1).collect();
        let labels = (0..n).map(|i| (i % 4) as u16).collect();
        Dataset::new(inputs, labels, 4, 3).unwrap()
    }

    #[test]
    fn rejects_bad_values() {
        assert!(Dataset::new(vec![2, 0, 0], vec![0], 2, 3).is_err());
        assert!(Dataset::new(vec![0, 0, 0], vec![2], 2, 3).is_err());
        assert!(Dataset::new(vec![0, 0], vec![0], 2, 3).is_err());
    }

    #[test]
    fn split_keeps_order_and_tail() {
        let ds = toy(100);
        let (train, val) = split(&ds, 70, 20).unwrap();
        assert_eq!(train.len(), 70);
        assert_eq!(val.len(), 20);
        assert_eq!(train.input(0), ds.input(0));
        assert_eq!(val.input(0), ds.input(80));
        assert_eq!(val.label(19), ds.label(99));
    }

    #[test]
    fn split_everything_into_train() {
        let ds = toy(10);
        let (train, val) = split(&ds, 10, 0).unwrap();
        assert_eq!(train, ds);
        assert!(val.is_empty());
    }

    #[test]
    fn split_overflow_is_an_error() {
        assert!(split(&toy(100), 90, 20).is_err());
        assert!(split(&toy(100), usize::MAX, 2).is_err());
    }

    #[test]
    fn container_round_trip() {
        let ds = toy(25);
        let back = Dataset::from_container(&Container::from_bytes(&ds.to_container().to_bytes()).unwrap()).unwrap();
        assert_eq!(back, ds);
    }
}
