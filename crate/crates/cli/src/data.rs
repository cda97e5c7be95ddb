use std::path::{Path, PathBuf};

use clap::Args;
use tnn::data::{binarize_threshold, load_mnist_idx, split, synth_blobs, Dataset};
use tnn::Rng;

use crate::config::Settings;
use crate::error::{CliError, Context};
use crate::manifest::RunManifest;

#[derive(Args, Debug, Default)]
pub struct DataArgs {
    /// `mnist` (IDX files under --data-dir) or `synth` (seeded ternary blobs).
    #[arg(long)]
    pub dataset: Option<String>,
    /// Directory holding train-/t10k- IDX files, optionally gzipped.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Use only the first N training-file samples.
    #[arg(long)]
    pub subset: Option<usize>,
    /// Use only the first N test samples.
    #[arg(long)]
    pub test_subset: Option<usize>,
    /// The last N (subset) training samples form the validation split.
    #[arg(long)]
    pub val_count: Option<usize>,
    /// Grayscale binarization threshold: pixel > T becomes +1, else -1.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Synthetic training-file size.
    #[arg(long)]
    pub synth_samples: Option<usize>,
    /// Synthetic test size.
    #[arg(long)]
    pub synth_test: Option<usize>,
    #[arg(long)]
    pub synth_dim: Option<usize>,
    #[arg(long)]
    pub synth_classes: Option<usize>,
    #[arg(long)]
    pub data_seed: Option<u64>,
}

pub struct Splits {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

impl Splits {
    pub fn by_name(&self, name: &str) -> Result<&Dataset, CliError> {
        match name {
            "train" => Ok(&self.train),
            "validation" | "val" => Ok(&self.validation),
            "test" => Ok(&self.test),
            other => Err(CliError::usage(format!(
                "unknown split {other:?}, expected train|validation|test"
            ))),
        }
    }
}

fn idx_pair(dir: &Path, prefix: &str) -> Result<(PathBuf, PathBuf), CliError> {
    let find = |kind: &str| {
        let plain = dir.join(format!("{prefix}-{kind}"));
        let gz = dir.join(format!("{prefix}-{kind}.gz"));
        if plain.exists() {
            Ok(plain)
        } else if gz.exists() {
            Ok(gz)
        } else {
            Err(CliError::usage(format!("missing {} (or .gz)", plain.display())))
        }
    };
    Ok((find("images-idx3-ubyte")?, find("labels-idx1-ubyte")?))
}

fn load_idx(dir: &Path, prefix: &str, threshold: f64, man: &mut RunManifest) -> Result<Dataset, CliError> {
    let (images, labels) = idx_pair(dir, prefix)?;
    man.input(&images)?;
    man.input(&labels)?;
    let raw = load_mnist_idx(&images, &labels).context(|| format!("loading {}", images.display()))?;
    Ok(binarize_threshold(&raw, threshold)?)
}

pub fn load(args: &DataArgs, s: &Settings, man: &mut RunManifest) -> Result<Splits, CliError> {
    let dataset = s.get("dataset", args.dataset.clone(), "mnist".to_string())?;
    let subset = s.get_opt("subset", args.subset)?;
    let test_subset = s.get_opt("test-subset", args.test_subset)?;
    let val_count = s.get("val-count", args.val_count, 1000usize)?;
    let (full, test) = match dataset.as_str() {
        "mnist" => {
            let dir = s.get(
                "data-dir",
                args.data_dir.as_ref().map(|p| p.display().to_string()),
                "data/mnist-10k".into(),
            )?;
            let threshold = s.get("threshold", args.threshold, 127.0)?;
            let dir = PathBuf::from(dir);
            (
                load_idx(&dir, "train", threshold, man)?,
                load_idx(&dir, "t10k", threshold, man)?,
            )
        }
        "synth" => {
            let n = s.get("synth-samples", args.synth_samples, 2000usize)?;
            let nt = s.get("synth-test", args.synth_test, 500usize)?;
            let dim = s.get("synth-dim", args.synth_dim, 64usize)?;
            let classes = s.get("synth-classes", args.synth_classes, 4usize)?;
            let seed = s.get("data-seed", args.data_seed, 1u64)?;
            // One draw so train and test share centroids.
            let all = synth_blobs(&mut Rng::new(seed), n + nt, dim, classes)?;
            (all.slice(0, n), all.slice(n, n + nt))
        }
        other => {
            return Err(CliError::usage(format!(
                "unknown dataset {other:?}, expected mnist|synth"
            )))
        }
    };
    let full = match subset {
        Some(n) if n < full.len() => full.take(n),
        _ => full,
    };
    let test = match test_subset {
        Some(n) if n < test.len() => test.take(n),
        _ => test,
    };
    if val_count >= full.len() {
        return Err(CliError::usage(format!(
            "--val-count {val_count} leaves no training samples out of {}",
            full.len()
        )));
    }
    let (train, validation) = split(&full, full.len() - val_count, val_count)?;
    man.note("train_samples", train.len());
    man.note("validation_samples", validation.len());
    man.note("test_samples", test.len());
    Ok(Splits {
        train,
        validation,
        test,
    })
}
