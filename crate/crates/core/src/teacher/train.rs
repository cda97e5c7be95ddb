use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::math::Rng;
use crate::ternarizer::StudentLayer;

use super::model::{fire_one, DenseLayer, RealMlp, TernaryDist};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Classical momentum coefficient; 0 gives plain SGD.
    pub momentum: f64,
    pub seed: u64,
    pub early_stop_patience: usize,
    pub dropout_rate: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 100,
            learning_rate: 0.05,
            momentum: 0.9,
            seed: 1,
            early_stop_patience: 20,
            dropout_rate: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
        }
        // Zero is allowed so that a run can be checked to leave weights untouched.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate {} must be > 0",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument(format!(
                "momentum {} outside [0,1)",
                self.momentum
            )));
        }
        if let Some(p) = self.dropout_rate {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("dropout_rate {p} outside [0,1)")));
            }
        }
        Ok(())
    }
}

/// How hidden neurons produce their outputs during a forward pass.
pub enum Firing<'a> {
    /// Each neuron outputs its expectation ρ.
    Expected,
    /// Each neuron fires a ternary value drawn from its distribution.
    Sampled(&'a mut Rng),
}

/// Accumulated parameter gradients, laid out like the model's layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &RealMlp) -> Self {
        let layers = (0..model.num_layers()).map(|i| model.layer(i));
        let (weights, bias) = layers
            .map(|l| (vec![0.0; l.fan_in() * l.fan_out()], vec![0.0; l.fan_out()]))
            .unzip();
        Gradients { weights, bias }
    }

    pub fn clear(&mut self) {
        for v in self.weights.iter_mut().chain(self.bias.iter_mut()) {
            v.fill(0.0);
        }
    }
}

/// Scratch buffers reused across samples.
#[derive(Default)]
struct Workspace {
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    masks: Vec<Vec<bool>>,
    nonzero: Vec<Vec<usize>>,
    back: Vec<f64>,
    delta: Vec<f64>,
    logits: Vec<f64>,
}

/// Cross-entropy loss of one sample; adds its gradient into `grads`.
///
/// The backward pass always uses the derivative of ρ, whichever firing
/// mode produced the forward activations.
pub fn backprop(
    model: &RealMlp,
    x: &[i8],
    label: usize,
    firing: Firing<'_>,
    dropout: Option<f64>,
    grads: &mut Gradients,
) -> Result<f64> {
    if x.len() != model.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "input of length {} for fan-in {}",
            x.len(),
            model.input_dim()
        )));
    }
    if label >= model.num_classes() {
        return Err(Error::InvalidArgument(format!(
            "label {label} >= {} classes",
            model.num_classes()
        )));
    }
    let mut ws = Workspace::default();
    backprop_with(model, x, label, firing, dropout, grads, &mut ws)
}

fn backprop_with(
    model: &RealMlp,
    x: &[i8],
    label: usize,
    mut firing: Firing<'_>,
    dropout: Option<f64>,
    grads: &mut Gradients,
    ws: &mut Workspace,
) -> Result<f64> {
    let nh = model.hidden.len();
    ws.acts.resize(nh + 1, Vec::new());
    ws.pre.resize(nh, Vec::new());
    ws.masks.resize(nh, Vec::new());
    ws.nonzero.resize(nh + 1, Vec::new());
    ws.acts[0].clear();
    ws.acts[0].extend(x.iter().map(|&v| v as f64));

    for l in 0..nh {
        let (done, rest) = ws.acts.split_at_mut(l + 1);
        let (nz_done, _) = ws.nonzero.split_at_mut(l + 1);
        model.hidden[l].affine_into(&done[l], &mut nz_done[l], &mut ws.pre[l]);
        let out = &mut rest[0];
        out.clear();
        let mask = &mut ws.masks[l];
        mask.clear();
        for &y in &ws.pre[l] {
            let rho = model.activation.apply(y);
            let v = match &mut firing {
                Firing::Expected => rho,
                Firing::Sampled(rng) => {
                    let keep = match dropout {
                        Some(p) if p > 0.0 => rng.unit() >= p,
                        _ => true,
                    };
                    mask.push(keep);
                    if keep {
                        fire_one(rng, &TernaryDist::from_rho(rho)) as f64
                    } else {
                        0.0
                    }
                }
            };
            out.push(v);
        }
    }

    model
        .output
        .affine_into(&ws.acts[nh], &mut ws.nonzero[nh], &mut ws.logits);
    let max = ws.logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = ws.logits.iter().map(|&z| (z - max).exp()).sum();
    let loss = max + sum.ln() - ws.logits[label];
    if !loss.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite loss {loss} (max logit {max}, label {label})"
        )));
    }
    ws.delta.clear();
    ws.delta.extend(ws.logits.iter().map(|&z| (z - max).exp() / sum));
    ws.delta[label] -= 1.0;

    for l in (0..=nh).rev() {
        let layer: &DenseLayer = model.layer(l);
        let fan_in = layer.fan_in();
        let input = &ws.acts[l];
        let nz = &ws.nonzero[l];
        let gw = &mut grads.weights[l];
        let gb = &mut grads.bias[l];
        for (i, &d) in ws.delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            gb[i] += d;
            let row = &mut gw[i * fan_in..(i + 1) * fan_in];
            for &j in nz {
                row[j] += d * input[j];
            }
        }
        if l == 0 {
            break;
        }
        ws.back.clear();
        ws.back.resize(fan_in, 0.0);
        for (i, &d) in ws.delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            for (b, &w) in ws.back.iter_mut().zip(layer.weights.row(i)) {
                *b += d * w;
            }
        }
        let pre = &ws.pre[l - 1];
        let mask = &ws.masks[l - 1];
        ws.delta.clear();
        for (j, (&b, &y)) in ws.back.iter().zip(pre).enumerate() {
            let keep = mask.get(j).copied().unwrap_or(true);
            ws.delta
                .push(if keep { b * model.activation.derivative(y) } else { 0.0 });
        }
    }
    Ok(loss)
}

/// Mean cross-entropy of the expected-output forward pass.
fn expected_loss(model: &RealMlp, ds: &Dataset) -> f64 {
    if ds.is_empty() {
        return 0.0;
    }
    let total: f64 = (0..ds.len())
        .map(|i| {
            let z = model.expected_logits(ds.input(i));
            let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + z.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
            lse - z[ds.label(i)]
        })
        .sum();
    total / ds.len() as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean minibatch loss under stochastic firing.
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: RealMlp,
    pub history: Vec<EpochMetrics>,
    /// Epoch of the returned model; 0 means the starting model was kept.
    pub best_epoch: usize,
}

/// Trains a fresh teacher from Glorot-uniform initialization.
pub fn train_teacher(
    train: &Dataset,
    validation: &Dataset,
    arch: &[usize],
    activation: crate::math::Activation,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if arch.first() != Some(&train.input_dim()) {
        return Err(Error::DimensionMismatch(format!(
            "architecture {arch:?} does not start with input dim {}",
            train.input_dim()
        )));
    }
    if arch.last() != Some(&train.num_classes()) {
        return Err(Error::DimensionMismatch(format!(
            "architecture {arch:?} does not end with {} classes",
            train.num_classes()
        )));
    }
    let mut rng = Rng::new(cfg.seed);
    let model = RealMlp::init(arch, activation, &mut rng.split(0))?;
    run_sgd(model, train, validation, cfg, &mut rng, false)
}

/// Continues training an existing model; the starting point competes in
/// model selection as epoch 0.
pub fn fine_tune(model: &RealMlp, train: &Dataset, validation: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut rng = Rng::new(cfg.seed);
    run_sgd(model.clone(), train, validation, cfg, &mut rng, true)
}

fn run_sgd(
    mut model: RealMlp,
    train: &Dataset,
    validation: &Dataset,
    cfg: &TrainConfig,
    rng: &mut Rng,
    keep_initial: bool,
) -> Result<TrainOutcome> {
    if train.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    if train.input_dim() != model.input_dim() || train.num_classes() != model.num_classes() {
        return Err(Error::DimensionMismatch(format!(
            "dataset {}→{} does not fit model {:?}",
            train.input_dim(),
            train.num_classes(),
            model.arch()
        )));
    }
    let mut order_rng = rng.split(1);
    let mut fire_rng = rng.split(2);
    let mut grads = Gradients::zeros_like(&model);
    let mut velocity = Gradients::zeros_like(&model);
    let mut ws = Workspace::default();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::new();

    let score = |m: &RealMlp| (m.accuracy_expected(validation), -expected_loss(m, validation));
    let mut best = keep_initial.then(|| (score(&model), model.clone(), 0));
    let mut since_best = 0;

    for epoch in 1..=cfg.epochs {
        order_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.clear();
            for &i in batch {
                loss_sum += backprop_with(
                    &model,
                    train.input(i),
                    train.label(i),
                    Firing::Sampled(&mut fire_rng),
                    cfg.dropout_rate,
                    &mut grads,
                    &mut ws,
                )?;
            }
            apply_update(&mut model, &grads, &mut velocity, cfg, batch.len())?;
        }
        let metrics = EpochMetrics {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_accuracy: model.accuracy_expected(train),
            val_loss: expected_loss(&model, validation),
            val_accuracy: model.accuracy_expected(validation),
        };
        let s = (metrics.val_accuracy, -metrics.val_loss);
        history.push(metrics);
        let improved = best.as_ref().map_or(true, |(b, _, _)| s > *b);
        if improved {
            best = Some((s, model.clone(), epoch));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.early_stop_patience {
                break;
            }
        }
    }

    let (mut model, best_epoch) = match best {
        Some((_, m, e)) => (m, e),
        None => (model, 0),
    };
    model.info.seed = cfg.seed;
    model.info.epochs = history.len();
    model.info.best_epoch = best_epoch;
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
    })
}

fn apply_update(
    model: &mut RealMlp,
    grads: &Gradients,
    velocity: &mut Gradients,
    cfg: &TrainConfig,
    n: usize,
) -> Result<()> {
    let scale = 1.0 / n as f64;
    let nh = model.hidden.len();
    for l in 0..=nh {
        let layer = if l < nh {
            &mut model.hidden[l]
        } else {
            &mut model.output
        };
        let targets = [
            (
                layer.weights.as_mut_slice(),
                &grads.weights[l],
                &mut velocity.weights[l],
            ),
            (layer.bias.as_mut_slice(), &grads.bias[l], &mut velocity.bias[l]),
        ];
        for (param, g, v) in targets {
            for ((p, &g), v) in param.iter_mut().zip(g.iter()).zip(v.iter_mut()) {
                *v = cfg.momentum * *v + g * scale;
                *p -= cfg.learning_rate * *v;
                if !p.is_finite() {
                    return Err(Error::Numeric(format!("layer {l} parameter overflowed during update")));
                }
            }
        }
    }
    Ok(())
}

/// Fine-tunes the layers after a ternarized prefix.
///
/// The first `prefix.len()` hidden layers of `model` are replaced by the
/// given student layers and frozen: the suffix trains on the student
/// prefix's outputs, and the returned model keeps the original prefix
/// weights bit for bit. Layers from `prefix.len()` on therefore expect
/// student-prefix outputs as input.
pub fn staggered_retrain(
    model: &RealMlp,
    prefix: &[StudentLayer],
    train: &Dataset,
    validation: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let k = prefix.len();
    if k > model.hidden.len() {
        return Err(Error::InvalidArgument(format!(
            "frozen prefix of {k} layers but the model has {} hidden layers",
            model.hidden.len()
        )));
    }
    let mut cfg = cfg.clone();
    cfg.epochs = cfg.epochs.min(50);
    if k == 0 {
        return fine_tune(model, train, validation, &cfg);
    }
    let mut dim = model.input_dim();
    for (i, layer) in prefix.iter().enumerate() {
        if layer.input_dim() != dim || layer.len() != model.hidden[i].fan_out() {
            return Err(Error::DimensionMismatch(format!(
                "student layer {i} is {}→{}, teacher layer is {}→{}",
                layer.input_dim(),
                layer.len(),
                model.hidden[i].fan_in(),
                model.hidden[i].fan_out()
            )));
        }
        dim = layer.len();
    }
    let through_prefix = |ds: &Dataset| {
        ds.map_inputs(dim, |x| {
            let mut cur = x.to_vec();
            for layer in prefix {
                cur = layer.forward(&cur);
            }
            cur
        })
    };
    let train_s = through_prefix(train)?;
    let val_s = through_prefix(validation)?;
    let suffix = RealMlp::from_layers(model.hidden[k..].to_vec(), model.output.clone(), model.activation)?;
    let tuned = fine_tune(&suffix, &train_s, &val_s, &cfg)?;
    let mut out = model.clone();
    out.hidden.truncate(k);
    out.hidden.extend(tuned.model.hidden);
    out.output = tuned.model.output;
    out.info = tuned.model.info;
    Ok(TrainOutcome {
        model: out,
        history: tuned.history,
        best_epoch: tuned.best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{Activation, Matrix};

    fn toy() -> RealMlp {
        let mut rng = Rng::new(21);
        let mut m = RealMlp::init(&[5, 4, 3, 3], Activation::Tanh, &mut rng).unwrap();
        for l in m.hidden.iter_mut().chain(std::iter::once(&mut m.output)) {
            for b in l.bias.iter_mut() {
                *b = rng.uniform(-0.5, 0.5).unwrap();
            }
        }
        m
    }

    fn loss_of(m: &RealMlp, x: &[i8], label: usize) -> f64 {
        let mut g = Gradients::zeros_like(m);
        backprop(m, x, label, Firing::Expected, None, &mut g).unwrap()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let m = toy();
        let x = [1, 0, -1, 1, 1];
        let label = 2;
        let mut g = Gradients::zeros_like(&m);
        backprop(&m, &x, label, Firing::Expected, None, &mut g).unwrap();
        let h = 1e-6;
        for l in 0..m.num_layers() {
            let (fo, fi) = (m.layer(l).fan_out(), m.layer(l).fan_in());
            for idx in 0..fo * fi + fo {
                let perturb = |d: f64| {
                    let mut p = m.clone();
                    let layer = if l < p.hidden.len() {
                        &mut p.hidden[l]
                    } else {
                        &mut p.output
                    };
                    if idx < fo * fi {
                        layer.weights.as_mut_slice()[idx] += d;
                    } else {
                        layer.bias[idx - fo * fi] += d;
                    }
                    loss_of(&p, &x, label)
                };
                let fd = (perturb(h) - perturb(-h)) / (2.0 * h);
                let an = if idx < fo * fi {
                    g.weights[l][idx]
                } else {
                    g.bias[l][idx - fo * fi]
                };
                let scale = fd.abs().max(an.abs()).max(1e-3);
                assert!((fd - an).abs() / scale < 1e-4, "layer {l} param {idx}: fd {fd} vs {an}");
            }
        }
    }

    #[test]
    fn zero_learning_rate_leaves_weights() {
        let mut rng = Rng::new(3);
        let ds = crate::data::synth_blobs(&mut rng, 60, 8, 2).unwrap();
        let m = RealMlp::init(&[8, 4, 2], Activation::Tanh, &mut rng).unwrap();
        let cfg = TrainConfig {
            epochs: 1,
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        let out = fine_tune(&m, &ds, &ds, &cfg).unwrap();
        assert_eq!(out.model.hidden, m.hidden);
        assert_eq!(out.model.output, m.output);
    }

    #[test]
    fn learns_separable_blobs() {
        let mut rng = Rng::new(11);
        let ds = crate::data::synth_blobs(&mut rng, 400, 16, 2).unwrap();
        let (train, val) = crate::data::split(&ds, 300, 100).unwrap();
        let cfg = TrainConfig {
            epochs: 50,
            ..TrainConfig::default()
        };
        let out = train_teacher(&train, &val, &[16, 8, 2], Activation::Tanh, &cfg).unwrap();
        assert!(out.model.accuracy_expected(&val) >= 0.95);
        assert_eq!(out.model.info.best_epoch, out.best_epoch);
    }

    #[test]
    fn config_validation() {
        let bad = [
            TrainConfig {
                batch_size: 0,
                ..TrainConfig::default()
            },
            TrainConfig {
                learning_rate: -1.0,
                ..TrainConfig::default()
            },
            TrainConfig {
                dropout_rate: Some(1.0),
                ..TrainConfig::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn overflowing_logits_abort() {
        let big = DenseLayer::new(
            Matrix::from_rows(&[vec![f64::MAX], vec![-f64::MAX]]).unwrap(),
            vec![0.0; 2],
        )
        .unwrap();
        let m = RealMlp::from_layers(vec![], big, Activation::Tanh).unwrap();
        let mut g = Gradients::zeros_like(&m);
        let err = backprop(&m, &[1], 1, Firing::Expected, None, &mut g).unwrap_err();
        assert!(err.is_numeric());
    }
}
