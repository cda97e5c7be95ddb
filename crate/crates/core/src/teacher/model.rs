use std::collections::BTreeMap;
use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, FormatError, Result};
use crate::math::{Activation, Matrix, Rng};
use crate::runtime::container::{decode_meta, encode_meta, ByteReader, ByteWriter, Container};

/// Fully connected layer, `weights` is `fan_out x fan_in`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} biases for {} neurons",
                bias.len(),
                weights.rows()
            )));
        }
        if bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::Numeric("non-finite bias".into()));
        }
        Ok(DenseLayer { weights, bias })
    }

    /// Uniform in ±sqrt(6 / (fan_in + fan_out)), zero bias.
    pub fn glorot(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Result<Self> {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weights = Matrix::from_fn(fan_out, fan_in, |_, _| {
            rng.uniform(-limit, limit).expect("positive limit")
        })?;
        DenseLayer::new(weights, vec![0.0; fan_out])
    }

    #[inline]
    pub fn fan_in(&self) -> usize {
        self.weights.cols()
    }

    #[inline]
    pub fn fan_out(&self) -> usize {
        self.weights.rows()
    }

    /// `y = W x + b` into `out`, skipping zero inputs.
    pub(crate) fn affine_into(&self, x: &[f64], nonzero: &mut Vec<usize>, out: &mut Vec<f64>) {
        nonzero.clear();
        nonzero.extend(x.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, _)| j));
        out.clear();
        for (i, &b) in self.bias.iter().enumerate() {
            let row = self.weights.row(i);
            let mut s = b;
            for &j in nonzero.iter() {
                s += row[j] * x[j];
            }
            out.push(s);
        }
    }
}

/// Pre-activation `y = W x + b` of a layer.
pub fn transfer(layer: &DenseLayer, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != layer.fan_in() {
        return Err(Error::DimensionMismatch(format!(
            "input of length {} for fan-in {}",
            x.len(),
            layer.fan_in()
        )));
    }
    let mut out = Vec::with_capacity(layer.fan_out());
    layer.affine_into(x, &mut Vec::new(), &mut out);
    Ok(out)
}

/// Output distribution of one stochastically firing neuron.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TernaryDist {
    pub minus: f64,
    pub zero: f64,
    pub plus: f64,
}

impl TernaryDist {
    /// Fires `sign(rho)` with probability `|rho|`, otherwise 0.
    #[inline]
    pub fn from_rho(rho: f64) -> Self {
        TernaryDist {
            minus: (-rho).max(0.0),
            zero: 1.0 - rho.abs(),
            plus: rho.max(0.0),
        }
    }

    /// Point mass on `v`.
    pub fn certain(v: i8) -> Self {
        TernaryDist {
            minus: f64::from(u8::from(v < 0)),
            zero: f64::from(u8::from(v == 0)),
            plus: f64::from(u8::from(v > 0)),
        }
    }

    #[inline]
    pub fn prob(&self, v: i8) -> f64 {
        match v.signum() {
            -1 => self.minus,
            0 => self.zero,
            _ => self.plus,
        }
    }

    /// Most probable output; ties resolve to 0.
    #[inline]
    pub fn most_likely(&self) -> i8 {
        if self.zero >= self.plus && self.zero >= self.minus {
            0
        } else if self.plus > self.minus {
            1
        } else {
            -1
        }
    }

    pub fn mean(&self) -> f64 {
        self.plus - self.minus
    }
}

/// Firing distributions for pre-activations `y`.
pub fn ternary_probs(y: &[f64], activation: Activation) -> Vec<TernaryDist> {
    y.iter().map(|&v| TernaryDist::from_rho(activation.apply(v))).collect()
}

/// Draws one ternary output per distribution.
pub fn stochastic_fire(rng: &mut Rng, probs: &[TernaryDist]) -> Vec<i8> {
    probs.iter().map(|p| fire_one(rng, p)).collect()
}

#[inline]
pub(crate) fn fire_one(rng: &mut Rng, p: &TernaryDist) -> i8 {
    let u = rng.unit();
    if u < p.plus {
        1
    } else if u < p.plus + p.minus {
        -1
    } else {
        0
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TrainingInfo {
    pub seed: u64,
    pub epochs: usize,
    pub best_epoch: usize,
}

/// Teacher MLP: stochastic ternary hidden layers and a softmax output layer.
#[derive(Clone, Debug, PartialEq)]
pub struct RealMlp {
    pub hidden: Vec<DenseLayer>,
    pub output: DenseLayer,
    pub activation: Activation,
    pub info: TrainingInfo,
}

impl RealMlp {
    /// Random initialization for layer sizes `arch = [input, hidden..., classes]`.
    pub fn init(arch: &[usize], activation: Activation, rng: &mut Rng) -> Result<Self> {
        if arch.len() < 2 || arch.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "architecture {arch:?} needs >= 2 positive sizes"
            )));
        }
        let mut layers = arch
            .windows(2)
            .map(|w| DenseLayer::glorot(w[0], w[1], rng))
            .collect::<Result<Vec<_>>>()?;
        let output = layers.pop().expect("at least one layer");
        Ok(RealMlp {
            hidden: layers,
            output,
            activation,
            info: TrainingInfo::default(),
        })
    }

    pub fn from_layers(hidden: Vec<DenseLayer>, output: DenseLayer, activation: Activation) -> Result<Self> {
        let mut fan_in = hidden.first().unwrap_or(&output).fan_in();
        for layer in hidden.iter().chain(std::iter::once(&output)) {
            if layer.fan_in() != fan_in {
                return Err(Error::DimensionMismatch(format!(
                    "layer expects {} inputs, previous layer produces {fan_in}",
                    layer.fan_in()
                )));
            }
            fan_in = layer.fan_out();
        }
        Ok(RealMlp {
            hidden,
            output,
            activation,
            info: TrainingInfo::default(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layer(0).fan_in()
    }

    pub fn num_classes(&self) -> usize {
        self.output.fan_out()
    }

    /// Hidden layers plus the output layer.
    pub fn num_layers(&self) -> usize {
        self.hidden.len() + 1
    }

    pub fn layer(&self, i: usize) -> &DenseLayer {
        if i < self.hidden.len() {
            &self.hidden[i]
        } else {
            &self.output
        }
    }

    pub fn arch(&self) -> Vec<usize> {
        let mut arch = vec![self.input_dim()];
        arch.extend(self.hidden.iter().map(DenseLayer::fan_out));
        arch.push(self.num_classes());
        arch
    }

    /// Expected (mean-field) outputs after the first `upto` hidden layers.
    pub fn expected_hidden(&self, x: &[i8], upto: usize) -> Vec<f64> {
        let mut cur: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let mut nz = Vec::new();
        let mut y = Vec::new();
        for layer in &self.hidden[..upto] {
            layer.affine_into(&cur, &mut nz, &mut y);
            cur = y.iter().map(|&v| self.activation.apply(v)).collect();
        }
        cur
    }

    /// Output logits of the expected-output forward pass.
    pub fn expected_logits(&self, x: &[i8]) -> Vec<f64> {
        let h = self.expected_hidden(x, self.hidden.len());
        let mut out = Vec::new();
        self.output.affine_into(&h, &mut Vec::new(), &mut out);
        out
    }

    pub fn predict_expected(&self, x: &[i8]) -> usize {
        argmax(&self.expected_logits(x))
    }

    /// Accuracy of the expected-output forward pass.
    pub fn accuracy_expected(&self, ds: &Dataset) -> f64 {
        if ds.is_empty() {
            return 0.0;
        }
        let correct = (0..ds.len())
            .filter(|&i| self.predict_expected(ds.input(i)) == ds.label(i))
            .count();
        correct as f64 / ds.len() as f64
    }

    pub fn to_container(&self) -> Container {
        let mut meta = BTreeMap::new();
        meta.insert("kind".to_string(), "teacher".to_string());
        meta.insert("activation".to_string(), self.activation.name().to_string());
        meta.insert("seed".to_string(), self.info.seed.to_string());
        meta.insert("epochs".to_string(), self.info.epochs.to_string());
        meta.insert("best_epoch".to_string(), self.info.best_epoch.to_string());
        let mut c = Container::new();
        c.push(b"META", encode_meta(&meta));
        let mut dims = ByteWriter::new();
        let arch = self.arch();
        dims.u32(arch.len() as u32);
        for d in arch {
            dims.u32(d as u32);
        }
        c.push(b"DIMS", dims.finish());
        for i in 0..self.num_layers() {
            let layer = self.layer(i);
            let mut w = ByteWriter::new();
            for &v in layer.weights.as_slice() {
                w.f64(v);
            }
            c.push(b"WGHT", w.finish());
            let mut b = ByteWriter::new();
            for &v in &layer.bias {
                b.f64(v);
            }
            c.push(b"BIAS", b.finish());
        }
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let meta = decode_meta(c.require(b"META")?)?;
        if meta.get("kind").map(String::as_str) != Some("teacher") {
            return Err(FormatError::Malformed("container does not hold a teacher".into()).into());
        }
        let field = |k: &str| {
            meta.get(k)
                .ok_or_else(|| FormatError::Malformed(format!("teacher metadata lacks {k}")))
        };
        let activation: Activation = field("activation")?.parse()?;
        let parse_num = |k: &str| -> Result<u64> {
            field(k)?
                .parse::<u64>()
                .map_err(|_| FormatError::Malformed(format!("bad {k}")).into())
        };
        let info = TrainingInfo {
            seed: parse_num("seed")?,
            epochs: parse_num("epochs")? as usize,
            best_epoch: parse_num("best_epoch")? as usize,
        };
        let mut dims = ByteReader::new(c.require(b"DIMS")?, "DIMS");
        let n = dims.u32()? as usize;
        let arch = (0..n)
            .map(|_| dims.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        dims.finish()?;
        if arch.len() < 2 {
            return Err(FormatError::Malformed("teacher needs at least one layer".into()).into());
        }
        let weights: Vec<&[u8]> = c.all(b"WGHT").collect();
        let biases: Vec<&[u8]> = c.all(b"BIAS").collect();
        if weights.len() != arch.len() - 1 || biases.len() != arch.len() - 1 {
            return Err(FormatError::Malformed("layer sections disagree with DIMS".into()).into());
        }
        let mut layers = Vec::new();
        for (l, w) in arch.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let mut wr = ByteReader::new(weights[l], "WGHT");
            let data = (0..fan_in * fan_out).map(|_| wr.f64()).collect::<Result<Vec<_>, _>>()?;
            wr.finish()?;
            let mut br = ByteReader::new(biases[l], "BIAS");
            let bias = (0..fan_out).map(|_| br.f64()).collect::<Result<Vec<_>, _>>()?;
            br.finish()?;
            layers.push(DenseLayer::new(Matrix::from_vec(fan_out, fan_in, data)?, bias)?);
        }
        let output = layers.pop().expect("checked above");
        let mut model = RealMlp::from_layers(layers, output, activation)?;
        model.info = info;
        Ok(model)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.to_container().to_bytes()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container().write(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        RealMlp::from_container(&Container::read(path)?)
    }
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
