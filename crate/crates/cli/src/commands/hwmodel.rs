use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use tnn::hwmodel::{
    latency, reference_calibration, report, throughput, PipelineSpec, REFERENCE_CLOCK_HZ, REFERENCE_ROWS,
};

use crate::config::{self, Settings};
use crate::error::CliError;
use crate::manifest::RunManifest;

#[derive(Args, Debug)]
pub struct HwmodelArgs {
    /// Emit the twelve reference MLP configurations with calibrated overheads.
    #[arg(long, conflicts_with = "spec")]
    pub table5: bool,
    /// Pipeline spec file: `<name>.<field> = value` lines, fields input_dim,
    /// layer_sizes (e.g. 250x250x10), clock_hz, per_layer_overhead, fill_overhead.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Cost CSV; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

const FIELDS: [&str; 5] = [
    "input_dim",
    "layer_sizes",
    "clock_hz",
    "per_layer_overhead",
    "fill_overhead",
];

/// Parses a spec file. Missing clocks and overheads default to the
/// reference clock and reference calibration.
pub fn parse_specs(text: &str) -> Result<Vec<(String, PipelineSpec)>, CliError> {
    let kv = config::parse(text)?;
    let mut grouped: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut order = Vec::new();
    for (key, value) in kv {
        let (name, field) = key
            .rsplit_once('.')
            .ok_or_else(|| CliError::usage(format!("spec key {key:?} is not <name>.<field>")))?;
        if !FIELDS.contains(&field) {
            return Err(CliError::usage(format!("spec key {key:?}: unknown field {field:?}")));
        }
        if !grouped.contains_key(name) {
            order.push(name.to_string());
        }
        grouped
            .entry(name.to_string())
            .or_default()
            .insert(field.to_string(), value);
    }
    let cal = reference_calibration();
    let mut out = Vec::new();
    for name in order {
        let f = &grouped[&name];
        let num = |field: &str, default: Option<f64>| -> Result<f64, CliError> {
            match f.get(field) {
                Some(v) => v
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| CliError::usage(format!("{name}.{field}: bad number {v:?}"))),
                None => default.ok_or_else(|| CliError::usage(format!("{name}: missing {field}"))),
            }
        };
        let count = |field: &str, v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| CliError::usage(format!("{name}.{field}: bad count {v:?}")))
        };
        let input_dim = count(
            "input_dim",
            f.get("input_dim")
                .ok_or_else(|| CliError::usage(format!("{name}: missing input_dim")))?,
        )?;
        let layer_sizes = f
            .get("layer_sizes")
            .ok_or_else(|| CliError::usage(format!("{name}: missing layer_sizes")))?
            .split(['x', ';', ','])
            .map(|v| count("layer_sizes", v))
            .collect::<Result<Vec<_>, _>>()?;
        let spec = PipelineSpec {
            input_dim,
            layer_sizes,
            clock_hz: num("clock_hz", Some(REFERENCE_CLOCK_HZ))?,
            per_layer_overhead: num("per_layer_overhead", Some(cal.per_layer_overhead))?,
            pipeline_fill_overhead: num("fill_overhead", Some(cal.pipeline_fill_overhead))?,
        };
        spec.validate().map_err(|e| CliError::usage(format!("{name}: {e}")))?;
        out.push((name, spec));
    }
    Ok(out)
}

pub fn run(a: HwmodelArgs, s: &Settings) -> Result<(), CliError> {
    let mut man = RunManifest::new("hwmodel");
    man.config = s.finish()?;
    let specs = if a.table5 {
        let cal = reference_calibration();
        man.note("per_layer_overhead", cal.per_layer_overhead);
        man.note("fill_overhead", cal.pipeline_fill_overhead);
        REFERENCE_ROWS.iter().map(|r| (r.name(), r.spec(cal))).collect()
    } else if let Some(p) = &a.spec {
        let bytes = man.input(p)?;
        let text = String::from_utf8(bytes).map_err(|_| CliError::usage(format!("{} is not UTF-8", p.display())))?;
        parse_specs(&text)?
    } else {
        return Err(CliError::usage("hwmodel needs --table5 or --spec FILE"));
    };
    let csv = report(&specs).map_err(|e| CliError::usage(e.to_string()))?;
    if a.table5 {
        for (row, (_, spec)) in REFERENCE_ROWS.iter().zip(&specs) {
            let fps = throughput(spec);
            let us = latency(spec) * 1e6;
            eprintln!(
                "{:<12} {:>8.0} fps ({:+.2}% vs {:.0})  {:>6.2} us ({:+.2}% vs {})",
                row.name(),
                fps,
                100.0 * (fps / row.throughput_fps - 1.0),
                row.throughput_fps,
                us,
                100.0 * (us / row.latency_us - 1.0),
                row.latency_us
            );
        }
    }
    match &a.out {
        Some(p) => man.write(p, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    if let Some(p) = a.manifest {
        man.save(&p)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_named_specs() {
        let specs =
            parse_specs("a.input_dim = 784\na.layer_sizes = 250x10\nb.input_dim=4\nb.layer_sizes=3\nb.clock_hz=1\n")
                .unwrap();
        assert_eq!(specs.len(), 2);
        assert_eq!(specs[0].1.layer_sizes, vec![250, 10]);
        assert_eq!(specs[1].1.clock_hz, 1.0);
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_specs("a.input_dim = 784").is_err());
        assert!(parse_specs("a.input_dim = x\na.layer_sizes=1").is_err());
        assert!(parse_specs("a.colour = red").is_err());
        assert!(parse_specs("nodot = 1").is_err());
        assert!(parse_specs("a.input_dim = 0\na.layer_sizes = 1").is_err());
    }
}
