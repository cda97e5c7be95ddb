use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use tnn::teacher::{train_teacher, TrainConfig};
use tnn::Activation;

use super::{fmt_arch, parse_arch};
use crate::config::Settings;
use crate::data::{self, DataArgs};
use crate::error::CliError;
use crate::manifest::{sibling, RunManifest};

pub const METRICS_SCHEMA: &str = "tnn.train-metrics.v1";

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Layer widths including input and output, e.g. 784x64x64x10.
    #[arg(long)]
    pub arch: Option<String>,
    /// tanh | hard-tanh
    #[arg(long)]
    pub activation: Option<Activation>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    /// Stop after this many epochs without validation improvement.
    #[arg(long)]
    pub patience: Option<usize>,
    /// Input dropout rate for regularization.
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output teacher container.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch metrics CSV; defaults to `<out>.metrics.csv`.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Run manifest JSON; defaults to `<out>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn run(a: TrainArgs, s: &Settings, workers: usize) -> Result<(), CliError> {
    let mut man = RunManifest::new("train");
    let t0 = Instant::now();
    let splits = data::load(&a.data, s, &mut man)?;
    man.time("load_seconds", t0);
    let default_arch = fmt_arch(&[splits.train.input_dim(), 64, 64, splits.train.num_classes()]);
    let arch = parse_arch(&s.get("arch", a.arch, default_arch)?)?;
    let activation = s.get("activation", a.activation, Activation::Tanh)?;
    let d = TrainConfig::default();
    let cfg = TrainConfig {
        epochs: s.get("epochs", a.epochs, d.epochs)?,
        batch_size: s.get("batch-size", a.batch_size, d.batch_size)?,
        learning_rate: s.get("lr", a.lr, d.learning_rate)?,
        momentum: s.get("momentum", a.momentum, d.momentum)?,
        seed: s.get("seed", a.seed, d.seed)?,
        early_stop_patience: s.get("patience", a.patience, d.early_stop_patience)?,
        dropout_rate: s.get_opt("dropout", a.dropout)?,
    };
    man.config = s.finish()?;
    man.seed = Some(cfg.seed);

    let t1 = Instant::now();
    let out = train_teacher(&splits.train, &splits.validation, &arch, activation, &cfg)?;
    man.time("train_seconds", t1);

    let mut csv = format!("# schema={METRICS_SCHEMA}\nepoch,train_loss,train_accuracy,val_loss,val_accuracy\n");
    for m in &out.history {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            m.epoch, m.train_loss, m.train_accuracy, m.val_loss, m.val_accuracy
        ));
    }
    let test_acc = out.model.accuracy_expected(&splits.test);
    let val_acc = out.model.accuracy_expected(&splits.validation);

    man.write(&a.out, &out.model.to_bytes())?;
    man.write(
        &a.metrics.unwrap_or_else(|| sibling(&a.out, ".metrics.csv")),
        csv.as_bytes(),
    )?;
    man.note("arch", fmt_arch(&arch));
    man.note("best_epoch", out.best_epoch);
    man.note("epochs_run", out.history.len());
    man.note("validation_accuracy", val_acc);
    man.note("test_accuracy", test_acc);
    man.workers = Some(workers);
    println!(
        "teacher {} ({}): best epoch {} of {}, validation {:.2}%, test {:.2}%",
        fmt_arch(&arch),
        activation,
        out.best_epoch,
        out.history.len(),
        100.0 * val_acc,
        100.0 * test_acc
    );
    man.save(&a.manifest.unwrap_or_else(|| sibling(&a.out, ".manifest.json")))
}
