//! Python bindings: datasets, teacher training, ternarization, packed
//! inference and the hardware cost model.

use std::path::PathBuf;

use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tnn::data::{binarize_threshold, load_mnist_idx, split, synth_blobs};
use tnn::hwmodel::{self, PipelineSpec};
use tnn::runtime::{self, Counting, PackedTernaryVec};
use tnn::teacher::{self, TrainConfig};
use tnn::ternarizer::{self, GridPolicy, TernarizeConfig};
use tnn::{Activation, Error, Rng};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        e if e.is_numeric() => PyArithmeticError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr>(what: &str, s: &str) -> PyResult<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| PyValueError::new_err(format!("{what}: {e}")))
}

/// Labelled ternary samples.
#[pyclass(frozen, skip_from_py_object, module = "tnn")]
#[derive(Clone)]
struct Dataset {
    inner: tnn::data::Dataset,
}

#[pymethods]
impl Dataset {
    /// Builds a dataset from rows of -1/0/+1 values and integer labels.
    #[new]
    fn new(inputs: Vec<Vec<i8>>, labels: Vec<u16>, num_classes: usize) -> PyResult<Self> {
        let dim = inputs.first().map_or(0, Vec::len);
        let flat: Vec<i8> = inputs.into_iter().flatten().collect();
        Ok(Dataset {
            inner: tnn::data::Dataset::new(flat, labels, num_classes, dim).map_err(py_err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }

    #[getter]
    fn labels(&self) -> Vec<u16> {
        self.inner.labels().to_vec()
    }

    fn input(&self, i: usize) -> PyResult<Vec<i8>> {
        if i >= self.inner.len() {
            return Err(PyValueError::new_err(format!("index {i} out of range")));
        }
        Ok(self.inner.input(i).to_vec())
    }

    /// First `n` samples.
    fn take(&self, n: usize) -> Self {
        Dataset {
            inner: self.inner.take(n),
        }
    }

    /// `(train, validation)`: the first `train` and the last `validation` samples.
    fn split(&self, train: usize, validation: usize) -> PyResult<(Dataset, Dataset)> {
        let (a, b) = split(&self.inner, train, validation).map_err(py_err)?;
        Ok((Dataset { inner: a }, Dataset { inner: b }))
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(len={}, input_dim={}, num_classes={})",
            self.inner.len(),
            self.inner.input_dim(),
            self.inner.num_classes()
        )
    }
}

/// Loads an MNIST IDX image/label pair (optionally gzipped) and binarizes it.
#[pyfunction]
#[pyo3(signature = (images, labels, threshold = 127.0))]
fn load_mnist(images: PathBuf, labels: PathBuf, threshold: f64) -> PyResult<Dataset> {
    let raw = load_mnist_idx(images, labels).map_err(py_err)?;
    Ok(Dataset {
        inner: binarize_threshold(&raw, threshold).map_err(py_err)?,
    })
}

/// Seeded ternary Gaussian blobs.
#[pyfunction]
#[pyo3(signature = (n, dim, classes, seed = 1))]
fn synthetic_blobs(n: usize, dim: usize, classes: usize, seed: u64) -> PyResult<Dataset> {
    Ok(Dataset {
        inner: synth_blobs(&mut Rng::new(seed), n, dim, classes).map_err(py_err)?,
    })
}

/// Real-valued teacher MLP with stochastically firing ternary neurons.
#[pyclass(frozen, skip_from_py_object, module = "tnn")]
#[derive(Clone)]
struct Teacher {
    inner: teacher::RealMlp,
}

#[pymethods]
impl Teacher {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Teacher {
            inner: teacher::RealMlp::load(path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).map_err(py_err)
    }

    #[getter]
    fn arch(&self) -> Vec<usize> {
        self.inner.arch()
    }

    #[getter]
    fn activation(&self) -> &'static str {
        self.inner.activation.name()
    }

    /// Class predicted by the mean-field forward pass.
    fn predict(&self, x: Vec<i8>) -> PyResult<usize> {
        if x.len() != self.inner.input_dim() {
            return Err(PyValueError::new_err("input length does not match the teacher"));
        }
        Ok(self.inner.predict_expected(&x))
    }

    fn accuracy(&self, data: &Dataset) -> f64 {
        self.inner.accuracy_expected(&data.inner)
    }
}

/// Trains a teacher; returns `(teacher, history)` where history holds one
/// dict of losses and accuracies per epoch.
#[pyfunction]
#[pyo3(signature = (
    train, validation, arch, activation = "tanh", epochs = 100, batch_size = 100,
    learning_rate = 0.05, momentum = 0.9, patience = 20, dropout = None, seed = 1,
))]
#[allow(clippy::too_many_arguments)]
fn train_teacher<'py>(
    py: Python<'py>,
    train: &Dataset,
    validation: &Dataset,
    arch: Vec<usize>,
    activation: &str,
    epochs: usize,
    batch_size: usize,
    learning_rate: f64,
    momentum: f64,
    patience: usize,
    dropout: Option<f64>,
    seed: u64,
) -> PyResult<(Teacher, Vec<Bound<'py, PyDict>>)> {
    let activation: Activation = parse("activation", activation)?;
    let cfg = TrainConfig {
        epochs,
        batch_size,
        learning_rate,
        momentum,
        seed,
        early_stop_patience: patience,
        dropout_rate: dropout,
    };
    let out = py
        .detach(|| teacher::train_teacher(&train.inner, &validation.inner, &arch, activation, &cfg))
        .map_err(py_err)?;
    let history = out
        .history
        .iter()
        .map(|m| {
            let d = PyDict::new(py);
            d.set_item("epoch", m.epoch)?;
            d.set_item("train_loss", m.train_loss)?;
            d.set_item("train_accuracy", m.train_accuracy)?;
            d.set_item("val_loss", m.val_loss)?;
            d.set_item("val_accuracy", m.val_accuracy)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    Ok((Teacher { inner: out.model }, history))
}

/// Ternary network executed on bit-packed vectors.
#[pyclass(frozen, skip_from_py_object, module = "tnn")]
#[derive(Clone)]
struct TernaryModel {
    inner: runtime::TernaryMlp,
}

#[pymethods]
impl TernaryModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(TernaryModel {
            inner: runtime::TernaryMlp::load(path).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(TernaryModel {
            inner: runtime::TernaryMlp::from_bytes(data).map_err(py_err)?,
        })
    }

    fn to_bytes(&self) -> Vec<u8> {
        self.inner.to_bytes()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).map_err(py_err)
    }

    #[getter]
    fn arch(&self) -> Vec<usize> {
        self.inner.arch()
    }

    #[getter]
    fn sparsity(&self) -> f64 {
        self.inner.sparsity()
    }

    #[getter]
    fn meta(&self) -> std::collections::BTreeMap<String, String> {
        self.inner.meta().clone()
    }

    fn infer(&self, x: Vec<i8>) -> PyResult<usize> {
        let packed = PackedTernaryVec::pack(&x).map_err(py_err)?;
        runtime::infer(&self.inner, &packed).map_err(py_err)
    }

    /// Multiply-accumulate reference engine.
    fn infer_naive(&self, x: Vec<i8>) -> PyResult<usize> {
        runtime::infer_naive(&self.inner, &x).map_err(py_err)
    }

    /// Operation counts for one inference: adds, subs, ands, popcounts,
    /// compares and muls.
    fn count_ops<'py>(&self, py: Python<'py>, x: Vec<i8>) -> PyResult<Bound<'py, PyDict>> {
        let packed = PackedTernaryVec::pack(&x).map_err(py_err)?;
        let mut c = Counting::default();
        runtime::infer_with(&mut c, &self.inner, &packed).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("adds", c.counts.adds)?;
        d.set_item("subs", c.counts.subs)?;
        d.set_item("ands", c.counts.ands)?;
        d.set_item("popcounts", c.counts.popcounts)?;
        d.set_item("compares", c.counts.compares)?;
        d.set_item("muls", c.counts.muls)?;
        Ok(d)
    }

    /// Predicted class for every sample.
    fn predict(&self, py: Python<'_>, data: &Dataset) -> PyResult<Vec<usize>> {
        let ev = py
            .detach(|| runtime::evaluate(&self.inner, &data.inner))
            .map_err(py_err)?;
        Ok(ev.predictions)
    }

    fn accuracy(&self, py: Python<'_>, data: &Dataset) -> PyResult<f64> {
        let ev = py
            .detach(|| runtime::evaluate(&self.inner, &data.inner))
            .map_err(py_err)?;
        Ok(ev.accuracy())
    }
}

/// Converts a teacher into a ternary model; returns `(model, summary)`.
#[pyfunction]
#[pyo3(signature = (
    teacher, train, validation, epsilon = 0.95, probes = 5000, retrain = true,
    retrain_epochs = 50, grid = "full", seed = 7, max_output_sweeps = 10,
))]
#[allow(clippy::too_many_arguments)]
fn ternarize<'py>(
    py: Python<'py>,
    teacher: &Teacher,
    train: &Dataset,
    validation: &Dataset,
    epsilon: f64,
    probes: usize,
    retrain: bool,
    retrain_epochs: usize,
    grid: &str,
    seed: u64,
    max_output_sweeps: usize,
) -> PyResult<(TernaryModel, Bound<'py, PyDict>)> {
    let d = TernarizeConfig::default();
    let cfg = TernarizeConfig {
        epsilon,
        probe_count: probes,
        grid: parse::<GridPolicy>("grid", grid)?,
        rng_seed: seed,
        retrain,
        retrain_config: TrainConfig {
            epochs: retrain_epochs,
            seed,
            ..d.retrain_config
        },
        max_output_sweeps,
    };
    let res = py
        .detach(|| ternarizer::ternarize_network(&teacher.inner, &train.inner, &validation.inner, &cfg))
        .map_err(py_err)?;
    let summary = PyDict::new(py);
    summary.set_item("escalated_fraction", res.escalation_fraction())?;
    summary.set_item("output_sweeps", res.output_sweeps)?;
    summary.set_item("output_converged", res.output_converged)?;
    summary.set_item("output_train_accuracy", res.output_train_accuracy)?;
    summary.set_item("sparsity", res.model.sparsity())?;
    summary.set_item("neuron_report_csv", ternarizer::neuron_report_csv(&res.reports))?;
    Ok((TernaryModel { inner: res.model }, summary))
}

/// Dot product of two ternary vectors, computed on packed bit masks.
#[pyfunction]
fn ternary_dot(a: Vec<i8>, b: Vec<i8>) -> PyResult<i32> {
    let pa = PackedTernaryVec::pack(&a).map_err(py_err)?;
    let pb = PackedTernaryVec::pack(&b).map_err(py_err)?;
    runtime::ternary_dot(&pa, &pb).map_err(py_err)
}

/// Accumulator width in bits for a neuron with `k` inputs.
#[pyfunction]
fn adder_width(k: usize) -> PyResult<u32> {
    hwmodel::adder_width(k).map_err(py_err)
}

fn pipeline(
    input_dim: usize,
    layer_sizes: Vec<usize>,
    clock_hz: f64,
    per_layer_overhead: Option<f64>,
    fill_overhead: Option<f64>,
) -> PyResult<PipelineSpec> {
    let cal = hwmodel::reference_calibration();
    let spec = PipelineSpec {
        input_dim,
        layer_sizes,
        clock_hz,
        per_layer_overhead: per_layer_overhead.unwrap_or(cal.per_layer_overhead),
        pipeline_fill_overhead: fill_overhead.unwrap_or(cal.pipeline_fill_overhead),
    };
    spec.validate().map_err(py_err)?;
    Ok(spec)
}

/// `(images_per_second, latency_seconds)` of the hardware pipeline.
/// Overheads default to the reference calibration.
#[pyfunction]
#[pyo3(signature = (input_dim, layer_sizes, clock_hz = 200e6, per_layer_overhead = None, fill_overhead = None))]
fn pipeline_cost(
    input_dim: usize,
    layer_sizes: Vec<usize>,
    clock_hz: f64,
    per_layer_overhead: Option<f64>,
    fill_overhead: Option<f64>,
) -> PyResult<(f64, f64)> {
    let spec = pipeline(input_dim, layer_sizes, clock_hz, per_layer_overhead, fill_overhead)?;
    Ok((hwmodel::throughput(&spec), hwmodel::latency(&spec)))
}

/// Cost CSV of the twelve reference configurations.
#[pyfunction]
fn reference_report() -> PyResult<String> {
    let cal = hwmodel::reference_calibration();
    let specs: Vec<_> = hwmodel::REFERENCE_ROWS
        .iter()
        .map(|r| (r.name(), r.spec(cal)))
        .collect();
    hwmodel::report(&specs).map_err(py_err)
}

#[pymodule(name = "tnn")]
fn tnn_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", tnn::VERSION)?;
    m.add_class::<Dataset>()?;
    m.add_class::<Teacher>()?;
    m.add_class::<TernaryModel>()?;
    m.add_function(wrap_pyfunction!(load_mnist, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_blobs, m)?)?;
    m.add_function(wrap_pyfunction!(train_teacher, m)?)?;
    m.add_function(wrap_pyfunction!(ternarize, m)?)?;
    m.add_function(wrap_pyfunction!(ternary_dot, m)?)?;
    m.add_function(wrap_pyfunction!(adder_width, m)?)?;
    m.add_function(wrap_pyfunction!(pipeline_cost, m)?)?;
    m.add_function(wrap_pyfunction!(reference_report, m)?)?;
    Ok(())
}
