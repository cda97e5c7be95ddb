use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use rayon::prelude::*;
use tnn::runtime::{infer, infer_naive, PackedTernaryVec, TernaryMlp};

use super::eval::load_model;
use crate::config::Settings;
use crate::data::{self, DataArgs};
use crate::error::CliError;
use crate::manifest::{sibling, RunManifest};

pub const BENCH_SCHEMA: &str = "tnn.bench.v1";

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: PathBuf,
    /// Timed repetitions per engine; the median is reported.
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// Untimed warmup passes per engine.
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Results CSV; defaults to `<model>.bench.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn time_runs(warmup: usize, reps: usize, mut f: impl FnMut() -> tnn::Result<usize>) -> Result<f64, CliError> {
    for _ in 0..warmup {
        f()?;
    }
    let mut secs = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        std::hint::black_box(f()?);
        secs.push(t.elapsed().as_secs_f64());
    }
    Ok(median(secs))
}

fn packed_pass(model: &TernaryMlp, xs: &[PackedTernaryVec]) -> tnn::Result<usize> {
    xs.par_iter()
        .map(|x| infer(model, x))
        .try_fold(|| 0, |a, p| p.map(|p| a + p))
        .try_reduce(|| 0, |a, b| Ok(a + b))
}

pub fn run(a: BenchArgs, s: &Settings, workers: usize) -> Result<(), CliError> {
    let mut man = RunManifest::new("bench");
    let model = load_model(&a.model, &mut man)?;
    let splits = data::load(&a.data, s, &mut man)?;
    let reps = s.get("repetitions", a.repetitions, 5usize)?;
    let warmup = s.get("warmup", a.warmup, 1usize)?;
    man.config = s.finish()?;
    man.workers = Some(workers);
    if reps < 3 {
        return Err(CliError::usage("--repetitions must be at least 3"));
    }
    let ds = &splits.test;
    if ds.is_empty() {
        return Err(CliError::usage("the test split is empty"));
    }
    let xs = (0..ds.len())
        .map(|i| PackedTernaryVec::pack(ds.input(i)))
        .collect::<tnn::Result<Vec<_>>>()?;

    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| CliError::usage(format!("cannot start a worker: {e}")))?;
    let packed_1 = single.install(|| time_runs(warmup, reps, || packed_pass(&model, &xs)))?;
    let packed_n = time_runs(warmup, reps, || packed_pass(&model, &xs))?;
    let naive_n = time_runs(warmup, reps, || {
        (0..ds.len())
            .into_par_iter()
            .map(|i| infer_naive(&model, ds.input(i)))
            .try_fold(|| 0, |a, p| p.map(|p| a + p))
            .try_reduce(|| 0, |a, b| Ok(a + b))
    })?;

    let n = ds.len() as f64;
    let mut csv =
        format!("# schema={BENCH_SCHEMA}\nengine,workers,samples,repetitions,median_seconds,images_per_sec\n");
    let rows = [
        ("packed", 1, packed_1),
        ("packed", workers, packed_n),
        ("naive", workers, naive_n),
    ];
    for (engine, w, secs) in rows {
        csv.push_str(&format!("{engine},{w},{},{reps},{secs},{}\n", ds.len(), n / secs));
        println!("{engine:>6} x{w:<3} {:>12.0} images/s", n / secs);
    }
    let sparsity = model.sparsity();
    println!("weight sparsity {:.1}%", 100.0 * sparsity);
    man.note("sparsity", sparsity);
    man.note("packed_speedup_over_naive", naive_n / packed_n);
    man.write(
        &a.out.unwrap_or_else(|| sibling(&a.model, ".bench.csv")),
        csv.as_bytes(),
    )?;
    if let Some(p) = a.manifest {
        man.save(&p)?;
    }
    Ok(())
}
