use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::math::{Activation, Rng};
use crate::runtime::TernaryMlp;
use crate::teacher::{staggered_retrain, DenseLayer, EpochMetrics, RealMlp, TernaryDist, TrainConfig};

use super::score::{score_outputs, NeuronSurface, NeuronTargets, ProbeInputs, ScoreScratch};
use super::search::{search_with_fallback, SearchKind, SearchOutcome};
use super::student::{StudentLayer, StudentNeuron};
use super::weights::{GridPolicy, WeightGrid};

#[derive(Clone, Debug, PartialEq)]
pub struct TernarizeConfig {
    /// Normalized score below which a neuron escalates to exhaustive search.
    pub epsilon: f64,
    /// Training samples used as probes (all of them if fewer).
    pub probe_count: usize,
    pub grid: GridPolicy,
    pub rng_seed: u64,
    /// Fine-tune the not yet ternarized layers before each hidden layer.
    pub retrain: bool,
    pub retrain_config: TrainConfig,
    pub max_output_sweeps: usize,
}

impl Default for TernarizeConfig {
    fn default() -> Self {
        TernarizeConfig {
            epsilon: 0.95,
            probe_count: 5000,
            grid: GridPolicy::Full,
            rng_seed: 7,
            retrain: true,
            retrain_config: TrainConfig {
                epochs: 50,
                ..TrainConfig::default()
            },
            max_output_sweeps: 10,
        }
    }
}

impl TernarizeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidArgument(format!(
                "epsilon {} outside [0,1]",
                self.epsilon
            )));
        }
        if self.probe_count == 0 {
            return Err(Error::InvalidArgument("probe_count must be >= 1".into()));
        }
        if self.max_output_sweeps == 0 {
            return Err(Error::InvalidArgument("max_output_sweeps must be >= 1".into()));
        }
        if self.retrain {
            self.retrain_config.validate()?;
        }
        Ok(())
    }
}

/// Per-neuron search diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuronReport {
    pub layer: usize,
    pub neuron: usize,
    /// 0 for hidden layers; output-layer sweep number otherwise.
    pub sweep: usize,
    pub kind: SearchKind,
    pub score: f64,
    pub normalized_score: f64,
    pub dichotomic_score: Option<f64>,
    pub evaluations: usize,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub t_lo: f64,
    pub t_hi: f64,
    pub b_lo: i32,
    pub b_hi: i32,
    pub nonzeros: usize,
    /// Whether this search changed the neuron (always true outside coupled sweeps).
    pub adopted: bool,
}

impl NeuronReport {
    pub fn escalated(&self) -> bool {
        self.kind != SearchKind::Dichotomic
    }
}

#[derive(Clone, Debug)]
pub struct LayerResult {
    pub layer: StudentLayer,
    pub reports: Vec<NeuronReport>,
}

fn wrap(layer: usize, neuron: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::Neuron {
        layer,
        neuron,
        source: Box::new(e),
    }
}

fn search_neuron(
    layer_index: usize,
    neuron: usize,
    weights: &[f64],
    probes: &ProbeInputs,
    targets: &NeuronTargets,
    cfg: &TernarizeConfig,
) -> Result<(StudentNeuron, NeuronReport)> {
    let grid = WeightGrid::new(weights, cfg.grid)?;
    let mut surface = NeuronSurface::new(&grid, probes, targets)?;
    let outcome = search_with_fallback(&mut surface, cfg.epsilon, probes.len() as f64)?;
    let (a, b) = (outcome.found.a, outcome.found.b);
    let (score, b_lo, b_hi) = surface.evaluate(a, b)?;
    let student = StudentNeuron::new(grid.ternary(a, b), b_lo, b_hi)?;
    let report = report_for(
        layer_index,
        neuron,
        0,
        &grid,
        &outcome,
        score,
        probes.len(),
        &student,
        true,
    );
    Ok((student, report))
}

#[allow(clippy::too_many_arguments)]
fn report_for(
    layer: usize,
    neuron: usize,
    sweep: usize,
    grid: &WeightGrid,
    outcome: &SearchOutcome,
    score: f64,
    probes: usize,
    student: &StudentNeuron,
    adopted: bool,
) -> NeuronReport {
    let (rows, cols) = grid.shape();
    NeuronReport {
        layer,
        neuron,
        sweep,
        kind: outcome.kind,
        score,
        normalized_score: score / probes as f64,
        dichotomic_score: outcome.dichotomic_score,
        evaluations: outcome.evaluations,
        grid_rows: rows,
        grid_cols: cols,
        t_lo: grid.t_lo(outcome.found.a),
        t_hi: grid.t_hi(outcome.found.b),
        b_lo: student.b_lo,
        b_hi: student.b_hi,
        nonzeros: student.nonzeros(),
        adopted,
    }
}

/// Teacher firing distributions of a layer on every probe, one vector per neuron.
pub fn teacher_targets(layer: &DenseLayer, activation: Activation, teacher_inputs: &[Vec<f64>]) -> Vec<NeuronTargets> {
    let mut per_neuron: Vec<Vec<TernaryDist>> = vec![Vec::with_capacity(teacher_inputs.len()); layer.fan_out()];
    let mut nz = Vec::new();
    let mut y = Vec::new();
    for x in teacher_inputs {
        layer.affine_into(x, &mut nz, &mut y);
        for (i, &v) in y.iter().enumerate() {
            per_neuron[i].push(TernaryDist::from_rho(activation.apply(v)));
        }
    }
    per_neuron.iter().map(|d| NeuronTargets::from_dists(d)).collect()
}

/// Ternarizes one hidden layer, each neuron independently.
///
/// `teacher_inputs[d]` is what the teacher layer sees on probe `d`;
/// `student_inputs` holds the student prefix's outputs on the same probes.
pub fn ternarize_layer(
    layer: &DenseLayer,
    activation: Activation,
    layer_index: usize,
    teacher_inputs: &[Vec<f64>],
    student_inputs: &ProbeInputs,
    cfg: &TernarizeConfig,
) -> Result<LayerResult> {
    cfg.validate()?;
    if teacher_inputs.len() != student_inputs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} teacher probes but {} student probes",
            teacher_inputs.len(),
            student_inputs.len()
        )));
    }
    if let Some(x) = teacher_inputs.iter().find(|x| x.len() != layer.fan_in()) {
        return Err(Error::DimensionMismatch(format!(
            "teacher input of length {} for fan-in {}",
            x.len(),
            layer.fan_in()
        )));
    }
    let targets = teacher_targets(layer, activation, teacher_inputs);
    let results = (0..layer.fan_out())
        .into_par_iter()
        .map(|i| {
            search_neuron(layer_index, i, layer.weights.row(i), student_inputs, &targets[i], cfg)
                .map_err(wrap(layer_index, i))
        })
        .collect::<Result<Vec<_>>>()?;
    let (neurons, reports) = results.into_iter().unzip();
    Ok(LayerResult {
        layer: StudentLayer::new(neurons)?,
        reports,
    })
}

#[derive(Clone, Debug)]
pub struct OutputResult {
    pub layer: StudentLayer,
    pub reports: Vec<NeuronReport>,
    pub sweeps: usize,
    /// False when the sweep cap was hit while neurons were still changing.
    pub converged: bool,
    /// Argmax accuracy on the probes after the last sweep.
    pub train_accuracy: f64,
}

fn transfer_all(layer: &StudentLayer, probes: &ProbeInputs) -> Vec<Vec<i32>> {
    let rows: Vec<Vec<i8>> = (0..probes.len()).map(|d| probes.row(d)).collect();
    layer
        .neurons
        .iter()
        .map(|n| rows.iter().map(|x| n.transfer(x)).collect())
        .collect()
}

fn argmax_correct(y: &[Vec<i32>], labels: &[usize]) -> usize {
    (0..labels.len())
        .filter(|&d| {
            let mut best = 0;
            for i in 1..y.len() {
                if y[i][d] > y[best][d] {
                    best = i;
                }
            }
            best == labels[d]
        })
        .count()
}

/// Ternarizes the output layer against the labels.
///
/// The first sweep fits every output neuron on its own to a one-vs-rest
/// target (+1 for its class, -1 otherwise). Later sweeps revisit the
/// neurons in turn and adopt a new configuration only when it raises the
/// argmax accuracy of the whole layer; they stop once a sweep changes
/// nothing.
pub fn ternarize_output_layer(
    layer: &DenseLayer,
    layer_index: usize,
    student_inputs: &ProbeInputs,
    labels: &[usize],
    cfg: &TernarizeConfig,
) -> Result<OutputResult> {
    cfg.validate()?;
    if labels.len() != student_inputs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} probes",
            labels.len(),
            student_inputs.len()
        )));
    }
    let classes = layer.fan_out();
    if let Some(&l) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::InvalidArgument(format!("label {l} >= {classes} output neurons")));
    }
    let targets: Vec<NeuronTargets> = (0..classes).map(|c| NeuronTargets::from_labels(labels, c)).collect();
    let first = (0..classes)
        .into_par_iter()
        .map(|i| {
            search_neuron(layer_index, i, layer.weights.row(i), student_inputs, &targets[i], cfg)
                .map(|(n, mut r)| {
                    r.sweep = 1;
                    (n, r)
                })
                .map_err(wrap(layer_index, i))
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut neurons, mut reports): (Vec<StudentNeuron>, Vec<NeuronReport>) = first.into_iter().unzip();
    let mut y = transfer_all(&StudentLayer::new(neurons.clone())?, student_inputs);
    let mut correct = argmax_correct(&y, labels);
    let n = student_inputs.len();
    let mut sweeps = 1;
    let mut converged = false;
    let mut scratch = ScoreScratch::default();
    while sweeps < cfg.max_output_sweeps {
        sweeps += 1;
        let mut changed = false;
        for i in 0..classes {
            let rivals: Vec<(i32, usize)> = (0..n)
                .map(|d| {
                    let mut best = (i32::MIN, usize::MAX);
                    for (j, yj) in y.iter().enumerate() {
                        if j != i && yj[d] > best.0 {
                            best = (yj[d], j);
                        }
                    }
                    best
                })
                .collect();
            let grid = WeightGrid::new(layer.weights.row(i), cfg.grid).map_err(wrap(layer_index, i))?;
            let mut surface = NeuronSurface::argmax(&grid, student_inputs, i, &rivals, labels)?;
            let outcome = search_with_fallback(&mut surface, cfg.epsilon, n as f64).map_err(wrap(layer_index, i))?;
            let (a, b) = (outcome.found.a, outcome.found.b);
            let adopted = outcome.found.score > correct as f64;
            if adopted {
                let out = surface.outputs(a, b);
                let (_, b_lo, b_hi) =
                    score_outputs(&out, &targets[i], layer.fan_in(), &mut scratch).map_err(wrap(layer_index, i))?;
                neurons[i] = StudentNeuron::new(grid.ternary(a, b), b_lo, b_hi)?;
                y[i] = out;
                correct = outcome.found.score as usize;
                changed = true;
            }
            let shown = &neurons[i];
            reports.push(report_for(
                layer_index,
                i,
                sweeps,
                &grid,
                &outcome,
                outcome.found.score,
                n,
                shown,
                adopted,
            ));
        }
        if !changed {
            converged = true;
            break;
        }
    }
    Ok(OutputResult {
        layer: StudentLayer::new(neurons)?,
        reports,
        sweeps,
        converged,
        train_accuracy: correct as f64 / n as f64,
    })
}

/// Everything produced by [`ternarize_network`].
#[derive(Clone, Debug)]
pub struct NetworkResult {
    pub model: TernaryMlp,
    pub reports: Vec<NeuronReport>,
    pub output_sweeps: usize,
    pub output_converged: bool,
    pub output_train_accuracy: f64,
    /// Fine-tuning history per retrained layer index.
    pub retrain_history: Vec<(usize, Vec<EpochMetrics>)>,
    /// Training-sample indices used as probes.
    pub probe_indices: Vec<usize>,
}

impl NetworkResult {
    /// Fraction of first-pass neuron searches that ran exhaustively.
    pub fn escalation_fraction(&self) -> f64 {
        let first: Vec<&NeuronReport> = self.reports.iter().filter(|r| r.sweep <= 1).collect();
        if first.is_empty() {
            return 0.0;
        }
        first.iter().filter(|r| r.escalated()).count() as f64 / first.len() as f64
    }
}

/// Deterministic probe subset: all samples, or a seeded sample of them in index order.
pub fn select_probes(n: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    if count >= n {
        return idx;
    }
    Rng::new(seed).shuffle(&mut idx);
    idx.truncate(count);
    idx.sort_unstable();
    idx
}

/// Layer-by-layer ternarization of a trained teacher.
///
/// Hidden layers go in feed-forward order. With retraining on, every layer
/// after the first is preceded by a fine-tune of the remaining teacher
/// layers on the student prefix's outputs, and that prefix output is also
/// the teacher's input when probing. Without retraining the teacher sees
/// its own expected activations.
pub fn ternarize_network(
    teacher: &RealMlp,
    train: &Dataset,
    validation: &Dataset,
    cfg: &TernarizeConfig,
) -> Result<NetworkResult> {
    cfg.validate()?;
    if train.input_dim() != teacher.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "dataset input dim {} for teacher input dim {}",
            train.input_dim(),
            teacher.input_dim()
        )));
    }
    if train.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    let probe_indices = select_probes(train.len(), cfg.probe_count, cfg.rng_seed);
    let probe_ds = train.select(&probe_indices);
    let labels: Vec<usize> = (0..probe_ds.len()).map(|d| probe_ds.label(d)).collect();

    let mut current = teacher.clone();
    let mut students: Vec<StudentLayer> = Vec::new();
    let mut student_rows: Vec<Vec<i8>> = (0..probe_ds.len()).map(|d| probe_ds.input(d).to_vec()).collect();
    let mut reports = Vec::new();
    let mut retrain_history = Vec::new();

    for l in 0..teacher.hidden.len() {
        let on_prefix = cfg.retrain && l > 0;
        if on_prefix {
            let tuned = staggered_retrain(&current, &students, train, validation, &cfg.retrain_config)?;
            retrain_history.push((l, tuned.history));
            current = tuned.model;
        }
        let teacher_inputs: Vec<Vec<f64>> = if on_prefix {
            student_rows
                .iter()
                .map(|x| x.iter().map(|&v| v as f64).collect())
                .collect()
        } else {
            (0..probe_ds.len())
                .map(|d| current.expected_hidden(probe_ds.input(d), l))
                .collect()
        };
        let dim = student_rows[0].len();
        let flat: Vec<i8> = student_rows.concat();
        let probes = ProbeInputs::from_rows(student_rows.len(), dim, &flat)?;
        let result = ternarize_layer(&current.hidden[l], current.activation, l, &teacher_inputs, &probes, cfg)?;
        student_rows = student_rows.iter().map(|x| result.layer.forward(x)).collect();
        reports.extend(result.reports);
        students.push(result.layer);
    }

    let dim = student_rows[0].len();
    let probes = ProbeInputs::from_rows(student_rows.len(), dim, &student_rows.concat())?;
    let out = ternarize_output_layer(&teacher.output, teacher.hidden.len(), &probes, &labels, cfg)?;
    reports.extend(out.reports);
    students.push(out.layer);

    let layers = students
        .iter()
        .map(StudentLayer::to_packed)
        .collect::<Result<Vec<_>>>()?;
    let mut model = TernaryMlp::new(layers)?;
    model.set_meta("ternarizer.epsilon", cfg.epsilon.to_string());
    model.set_meta("ternarizer.probe_count", cfg.probe_count.to_string());
    model.set_meta("ternarizer.grid", cfg.grid.to_string());
    model.set_meta("ternarizer.rng_seed", cfg.rng_seed.to_string());
    model.set_meta("ternarizer.retrain", cfg.retrain.to_string());
    model.set_meta("ternarizer.output_sweeps", out.sweeps.to_string());
    model.set_meta("ternarizer.output_converged", out.converged.to_string());
    Ok(NetworkResult {
        model,
        reports,
        output_sweeps: out.sweeps,
        output_converged: out.converged,
        output_train_accuracy: out.train_accuracy,
        retrain_history,
        probe_indices,
    })
}
