use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use tnn::runtime::container::Container;
use tnn::runtime::evaluate;
use tnn::teacher::{RealMlp, TrainConfig};
use tnn::ternarizer::{neuron_report_csv, ternarize_network, GridPolicy, TernarizeConfig};

use crate::config::Settings;
use crate::data::{self, DataArgs};
use crate::error::{CliError, Context};
use crate::manifest::{sha256_hex, sibling, RunManifest};

pub const GAP_SCHEMA: &str = "tnn.gap.v1";

#[derive(Args, Debug)]
pub struct TernarizeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Teacher container written by `tnn train`.
    #[arg(long)]
    pub teacher: PathBuf,
    /// Normalized score below which a neuron is searched exhaustively.
    /// 0 disables escalation, 1 or more always searches exhaustively.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Training samples used to score candidate thresholds.
    #[arg(long)]
    pub probes: Option<usize>,
    /// Fine-tune the remaining real layers before ternarizing each hidden layer.
    #[arg(long, overrides_with = "no_retrain")]
    pub retrain: bool,
    #[arg(long)]
    pub no_retrain: bool,
    /// `full` or `capped:K`.
    #[arg(long)]
    pub grid: Option<GridPolicy>,
    /// Seed for probe selection and retraining.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub retrain_epochs: Option<usize>,
    #[arg(long)]
    pub retrain_lr: Option<f64>,
    /// Upper bound on output-layer coordinate-ascent sweeps.
    #[arg(long)]
    pub max_sweeps: Option<usize>,
    /// Output student container.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-neuron search CSV; defaults to `<out>.neurons.csv`.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Accuracy-gap CSV; defaults to `<out>.gap.csv`.
    #[arg(long)]
    pub gap: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn run(a: TernarizeArgs, s: &Settings, workers: usize) -> Result<(), CliError> {
    let mut man = RunManifest::new("ternarize");
    let t0 = Instant::now();
    let teacher_bytes = man.input(&a.teacher)?;
    let teacher = Container::from_bytes(&teacher_bytes)
        .map_err(tnn::Error::from)
        .and_then(|c| RealMlp::from_container(&c))
        .context(|| format!("reading teacher {}", a.teacher.display()))?;
    let splits = data::load(&a.data, s, &mut man)?;
    man.time("load_seconds", t0);

    let d = TernarizeConfig::default();
    let flag_retrain = if a.no_retrain {
        Some(false)
    } else if a.retrain {
        Some(true)
    } else {
        None
    };
    let seed = s.get("seed", a.seed, d.rng_seed)?;
    let cfg = TernarizeConfig {
        epsilon: s.get("epsilon", a.epsilon, d.epsilon)?,
        probe_count: s.get("probes", a.probes, d.probe_count)?,
        grid: s.get("grid", a.grid, d.grid)?,
        rng_seed: seed,
        retrain: s.get("retrain", flag_retrain, d.retrain)?,
        retrain_config: TrainConfig {
            epochs: s.get("retrain-epochs", a.retrain_epochs, d.retrain_config.epochs)?,
            learning_rate: s.get("retrain-lr", a.retrain_lr, d.retrain_config.learning_rate)?,
            seed,
            ..d.retrain_config
        },
        max_output_sweeps: s.get("max-sweeps", a.max_sweeps, d.max_output_sweeps)?,
    };
    man.config = s.finish()?;
    man.seed = Some(seed);
    man.workers = Some(workers);

    let t1 = Instant::now();
    let mut res = ternarize_network(&teacher, &splits.train, &splits.validation, &cfg)?;
    man.time("ternarize_seconds", t1);
    res.model.set_meta("teacher.sha256", sha256_hex(&teacher_bytes));

    let teacher_train = teacher.accuracy_expected(&splits.train);
    let teacher_test = teacher.accuracy_expected(&splits.test);
    let student_train = evaluate(&res.model, &splits.train)?.accuracy();
    let student_test = evaluate(&res.model, &splits.test)?.accuracy();
    let escalated = res.escalation_fraction();
    let train_gap = 100.0 * (teacher_train - student_train);
    let test_gap = 100.0 * (teacher_test - student_test);
    let sparsity = res.model.sparsity();

    let mut gap = format!("# schema={GAP_SCHEMA}\n");
    gap.push_str("epsilon,teacher_train_accuracy,student_train_accuracy,train_gap_pct,teacher_test_accuracy,student_test_accuracy,test_gap_pct,escalated_fraction,output_sweeps,output_converged,sparsity\n");
    gap.push_str(&format!(
        "{},{teacher_train},{student_train},{train_gap},{teacher_test},{student_test},{test_gap},{escalated},{},{},{sparsity}\n",
        cfg.epsilon, res.output_sweeps, res.output_converged
    ));

    man.write(&a.out, &res.model.to_bytes())?;
    man.write(
        &a.report.unwrap_or_else(|| sibling(&a.out, ".neurons.csv")),
        neuron_report_csv(&res.reports).as_bytes(),
    )?;
    man.write(&a.gap.unwrap_or_else(|| sibling(&a.out, ".gap.csv")), gap.as_bytes())?;
    man.note("teacher_test_accuracy", teacher_test);
    man.note("student_test_accuracy", student_test);
    man.note("test_gap_pct", test_gap);
    man.note("escalated_fraction", escalated);
    man.note("output_sweeps", res.output_sweeps);
    man.note("output_converged", res.output_converged);
    man.note("sparsity", sparsity);
    println!(
        "student: test {:.2}% (teacher {:.2}%, gap {:.2} points), escalated {:.1}% of neurons, sparsity {:.1}%",
        100.0 * student_test,
        100.0 * teacher_test,
        test_gap,
        100.0 * escalated,
        100.0 * sparsity
    );
    man.save(&a.manifest.unwrap_or_else(|| sibling(&a.out, ".manifest.json")))
}
