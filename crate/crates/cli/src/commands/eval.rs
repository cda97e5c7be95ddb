use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, ValueEnum};
use rayon::prelude::*;
use tnn::runtime::{evaluate, infer_naive, infer_with, Counting, OpCounts, PackedTernaryVec, TernaryMlp};

use crate::config::Settings;
use crate::data::{self, DataArgs};
use crate::error::{CliError, Context};
use crate::manifest::{sibling, RunManifest};

pub const PREDICTIONS_SCHEMA: &str = "tnn.predictions.v1";
pub const CONFUSION_SCHEMA: &str = "tnn.confusion.v1";
pub const EVAL_SCHEMA: &str = "tnn.eval.v1";

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Engine {
    /// Bit-packed, multiplication-free.
    Packed,
    /// Dense i8 reference with multiplications.
    Naive,
}

impl std::fmt::Display for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Engine::Packed => "packed",
            Engine::Naive => "naive",
        })
    }
}

impl std::str::FromStr for Engine {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Engine as ValueEnum>::from_str(s, false)
    }
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Student container written by `tnn ternarize`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum)]
    pub engine: Option<Engine>,
    /// train | validation | test
    #[arg(long)]
    pub split: Option<String>,
    /// Summary CSV; defaults to `<model>.eval.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-sample predictions CSV.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Confusion matrix CSV, rows are labels and columns predictions.
    #[arg(long)]
    pub confusion: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn load_model(path: &std::path::Path, man: &mut RunManifest) -> Result<TernaryMlp, CliError> {
    let bytes = man.input(path)?;
    TernaryMlp::from_bytes(&bytes).context(|| format!("reading model {}", path.display()))
}

fn add(total: &mut OpCounts, c: &OpCounts) {
    total.adds += c.adds;
    total.subs += c.subs;
    total.ands += c.ands;
    total.popcounts += c.popcounts;
    total.compares += c.compares;
    total.muls += c.muls;
}

pub fn run(a: EvalArgs, s: &Settings, workers: usize) -> Result<(), CliError> {
    let mut man = RunManifest::new("eval");
    let model = load_model(&a.model, &mut man)?;
    let splits = data::load(&a.data, s, &mut man)?;
    let engine = s.get("engine", a.engine, Engine::Packed)?;
    let split = s.get("split", a.split, "test".to_string())?;
    man.config = s.finish()?;
    man.workers = Some(workers);
    let ds = splits.by_name(&split)?;
    if ds.is_empty() {
        return Err(CliError::usage(format!("the {split} split is empty")));
    }
    if ds.input_dim() != model.input_dim() {
        return Err(CliError::usage(format!(
            "dataset input dim {} does not match model input dim {}",
            ds.input_dim(),
            model.input_dim()
        )));
    }

    let t0 = Instant::now();
    let predictions = match engine {
        Engine::Packed => evaluate(&model, ds)?.predictions,
        Engine::Naive => (0..ds.len())
            .into_par_iter()
            .map(|i| infer_naive(&model, ds.input(i)))
            .collect::<tnn::Result<Vec<_>>>()?,
    };
    man.time("inference_seconds", t0);

    // Instrumented pass over the packed engine: proves no multiplication ran.
    let counts = (0..ds.len())
        .into_par_iter()
        .map(|i| {
            let mut c = Counting::default();
            infer_with(&mut c, &model, &PackedTernaryVec::pack(ds.input(i))?)?;
            Ok(c.counts)
        })
        .collect::<tnn::Result<Vec<_>>>()?
        .iter()
        .fold(OpCounts::default(), |mut t, c| {
            add(&mut t, c);
            t
        });

    let classes = model.num_classes();
    let mut confusion = vec![vec![0usize; classes]; classes.max(ds.num_classes())];
    let mut pred_csv = format!("# schema={PREDICTIONS_SCHEMA}\nindex,predicted,label\n");
    let mut correct = 0;
    for (i, &p) in predictions.iter().enumerate() {
        let l = ds.label(i);
        correct += usize::from(p == l);
        confusion[l][p] += 1;
        pred_csv.push_str(&format!("{i},{p},{l}\n"));
    }
    let accuracy = correct as f64 / ds.len() as f64;
    let error_pct = 100.0 * (1.0 - accuracy);

    let mut conf_csv = format!("# schema={CONFUSION_SCHEMA}\nlabel");
    for p in 0..classes {
        conf_csv.push_str(&format!(",pred_{p}"));
    }
    conf_csv.push('\n');
    for (l, row) in confusion.iter().enumerate() {
        conf_csv.push_str(&l.to_string());
        for c in row {
            conf_csv.push_str(&format!(",{c}"));
        }
        conf_csv.push('\n');
    }

    let summary = format!(
        "# schema={EVAL_SCHEMA}\nengine,split,samples,correct,accuracy,error_pct,packed_adds,packed_subs,packed_ands,packed_popcounts,packed_compares,packed_muls\n{engine},{split},{},{correct},{accuracy},{error_pct},{},{},{},{},{},{}\n",
        ds.len(),
        counts.adds,
        counts.subs,
        counts.ands,
        counts.popcounts,
        counts.compares,
        counts.muls
    );

    man.write(
        &a.out.unwrap_or_else(|| sibling(&a.model, ".eval.csv")),
        summary.as_bytes(),
    )?;
    if let Some(p) = &a.predictions {
        man.write(p, pred_csv.as_bytes())?;
    }
    if let Some(p) = &a.confusion {
        man.write(p, conf_csv.as_bytes())?;
    }
    man.note("accuracy", accuracy);
    man.note("error_pct", error_pct);
    man.note("packed_multiplications", counts.muls);
    println!(
        "{engine} engine on {split} ({} samples): error {error_pct:.2}%, packed engine multiplications: {}",
        ds.len(),
        counts.muls
    );
    if let Some(p) = a.manifest {
        man.save(&p)?;
    }
    Ok(())
}
