//! Analytic cost model of a layer-pipelined ternary MLP accelerator.
//!
//! Each layer is a pipeline stage that consumes one input item per clock
//! cycle, so a stage is busy for as many cycles as its input dimension.
//! The slowest stage bounds throughput; latency is the time for one image to
//! flow through every stage. Two overhead constants absorb the unpublished
//! circuit details and are fitted against measured configurations.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Bits of the accumulators summing `k` ternary products: `ceil(log2 k) + 1`.
pub fn adder_width(k: usize) -> Result<u32> {
    if k == 0 {
        return Err(Error::InvalidArgument("adder over zero inputs".into()));
    }
    Ok(usize::BITS - (k - 1).leading_zeros() + 1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineSpec {
    pub input_dim: usize,
    /// Neurons per layer, output layer last.
    pub layer_sizes: Vec<usize>,
    pub clock_hz: f64,
    /// Extra cycles every stage spends per image.
    pub per_layer_overhead: f64,
    /// Extra cycles to fill and drain the whole pipeline once.
    pub pipeline_fill_overhead: f64,
}

impl PipelineSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.clock_hz > 0.0 && self.clock_hz.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "clock {} Hz must be positive",
                self.clock_hz
            )));
        }
        if self.input_dim == 0 || self.layer_sizes.contains(&0) {
            return Err(Error::InvalidArgument("pipeline dimensions must be >= 1".into()));
        }
        if self.per_layer_overhead < 0.0 || self.pipeline_fill_overhead < 0.0 {
            return Err(Error::InvalidArgument("overheads must be non-negative".into()));
        }
        Ok(())
    }

    /// Input dimension of every stage.
    pub fn stage_inputs(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim];
        if let Some((_, rest)) = self.layer_sizes.split_last() {
            dims.extend_from_slice(rest);
        }
        dims
    }

    /// Adder width of each layer's neurons.
    pub fn adder_widths(&self) -> Vec<u32> {
        let inputs = self.stage_inputs();
        self.layer_sizes
            .iter()
            .zip(inputs)
            .map(|(_, k)| adder_width(k).expect("validated dims"))
            .collect()
    }
}

/// Images per second: the clock over the busiest stage's cycles per image.
pub fn throughput(spec: &PipelineSpec) -> f64 {
    let widest = spec.stage_inputs().into_iter().max().unwrap_or(spec.input_dim);
    spec.clock_hz / (widest as f64 + spec.per_layer_overhead)
}

/// Seconds from the first input item to the classification of one image.
pub fn latency(spec: &PipelineSpec) -> f64 {
    let layers: f64 = spec
        .layer_sizes
        .iter()
        .map(|&n| n as f64 + spec.per_layer_overhead)
        .sum();
    (spec.input_dim as f64 + layers + spec.pipeline_fill_overhead) / spec.clock_hz
}

/// Fitted overhead constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub per_layer_overhead: f64,
    pub pipeline_fill_overhead: f64,
}

/// Solves for the two overheads from two measured latencies.
///
/// Latency is linear in both constants, so two configurations with
/// different depths determine them exactly.
pub fn fit_overheads(first: (&PipelineSpec, f64), second: (&PipelineSpec, f64)) -> Result<Calibration> {
    let row = |spec: &PipelineSpec, seconds: f64| {
        let base = spec.input_dim as f64 + spec.layer_sizes.iter().sum::<usize>() as f64;
        (spec.layer_sizes.len() as f64, seconds * spec.clock_hz - base)
    };
    let (d1, r1) = row(first.0, first.1);
    let (d2, r2) = row(second.0, second.1);
    if d1 == d2 {
        return Err(Error::InvalidArgument("calibration rows need different depths".into()));
    }
    let per_layer = (r1 - r2) / (d1 - d2);
    Ok(Calibration {
        per_layer_overhead: per_layer,
        pipeline_fill_overhead: r1 - d1 * per_layer,
    })
}

/// A measured MLP configuration: `depth` hidden layers of `hidden` neurons
/// on 784 inputs, 10 outputs, 200 MHz.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasuredRow {
    pub hidden: usize,
    pub depth: usize,
    pub throughput_fps: f64,
    pub latency_us: f64,
}

/// Published throughput and latency of the reference accelerator.
pub const REFERENCE_ROWS: [MeasuredRow; 12] = {
    const fn r(hidden: usize, depth: usize, throughput_fps: f64, latency_us: f64) -> MeasuredRow {
        MeasuredRow {
            hidden,
            depth,
            throughput_fps,
            latency_us,
        }
    }
    [
        r(250, 1, 255_102.0, 5.37),
        r(250, 2, 255_102.0, 6.73),
        r(250, 3, 255_102.0, 8.09),
        r(500, 1, 255_102.0, 6.63),
        r(500, 2, 255_102.0, 9.24),
        r(500, 3, 255_102.0, 11.9),
        r(750, 1, 255_102.0, 7.88),
        r(750, 2, 255_102.0, 11.8),
        r(750, 3, 255_102.0, 15.6),
        r(1000, 1, 198_019.0, 10.2),
        r(1000, 2, 198_019.0, 15.3),
        r(1000, 3, 198_019.0, 20.5),
    ]
};

pub const REFERENCE_CLOCK_HZ: f64 = 200e6;

impl MeasuredRow {
    pub fn spec(&self, cal: Calibration) -> PipelineSpec {
        let mut layer_sizes = vec![self.hidden; self.depth];
        layer_sizes.push(10);
        PipelineSpec {
            input_dim: 784,
            layer_sizes,
            clock_hz: REFERENCE_CLOCK_HZ,
            per_layer_overhead: cal.per_layer_overhead,
            pipeline_fill_overhead: cal.pipeline_fill_overhead,
        }
    }

    pub fn name(&self) -> String {
        format!("mlp-{}x{}", self.hidden, self.depth)
    }
}

/// Overheads fitted on the 250x3 and 750x2 reference rows.
pub fn reference_calibration() -> Calibration {
    let pick = |h, d| {
        *REFERENCE_ROWS
            .iter()
            .find(|r| r.hidden == h && r.depth == d)
            .expect("row present")
    };
    let zero = Calibration {
        per_layer_overhead: 0.0,
        pipeline_fill_overhead: 0.0,
    };
    let (a, b) = (pick(250, 3), pick(750, 2));
    fit_overheads(
        (&a.spec(zero), a.latency_us * 1e-6),
        (&b.spec(zero), b.latency_us * 1e-6),
    )
    .expect("rows differ in depth")
}

pub const REPORT_SCHEMA: &str = "tnn.hwmodel.v1";

/// CSV cost table, one row per named configuration.
pub fn report(specs: &[(String, PipelineSpec)]) -> Result<String> {
    let mut out = format!("# schema={REPORT_SCHEMA}\n");
    out.push_str(
        "name,input_dim,layer_sizes,adder_bits,clock_hz,per_layer_overhead,fill_overhead,throughput_fps,latency_us\n",
    );
    for (name, spec) in specs {
        spec.validate()?;
        let join = |v: Vec<String>| v.join(";");
        writeln!(
            out,
            "{},{},{},{},{},{:.3},{:.3},{:.1},{:.4}",
            name,
            spec.input_dim,
            join(spec.layer_sizes.iter().map(|s| s.to_string()).collect()),
            join(spec.adder_widths().iter().map(|s| s.to_string()).collect()),
            spec.clock_hz,
            spec.per_layer_overhead,
            spec.pipeline_fill_overhead,
            throughput(spec),
            latency(spec) * 1e6
        )
        .expect("writing to a String");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(input: usize, layers: &[usize], clock: f64, o: f64, f: f64) -> PipelineSpec {
        PipelineSpec {
            input_dim: input,
            layer_sizes: layers.to_vec(),
            clock_hz: clock,
            per_layer_overhead: o,
            pipeline_fill_overhead: f,
        }
    }

    #[test]
    fn adder_widths() {
        assert_eq!(adder_width(784).unwrap(), 11);
        assert_eq!(adder_width(1).unwrap(), 1);
        assert_eq!(adder_width(1024).unwrap(), 11);
        assert_eq!(adder_width(2).unwrap(), 2);
        assert_eq!(adder_width(1025).unwrap(), 12);
        assert!(adder_width(0).is_err());
    }

    #[test]
    fn throughput_examples() {
        let t = throughput(&spec(784, &[500, 500, 10], 200e6, 0.0, 0.0));
        assert_eq!(t.round(), 255_102.0);
        let t = throughput(&spec(784, &[1000, 1000, 10], 200e6, 10.0, 0.0));
        assert_eq!(t.floor(), 198_019.0);
        assert_eq!(throughput(&spec(1, &[1], 1.0, 0.0, 0.0)), 1.0);
    }

    #[test]
    fn latency_examples() {
        assert_eq!(latency(&spec(100, &[], 1e3, 5.0, 0.0)), 0.1);
        let l = latency(&spec(784, &[250, 10], 200e6, 8.0, 42.0));
        assert!((l - 1102.0 / 200e6).abs() < 1e-15);
    }

    #[test]
    fn stage_inputs_skip_the_output_width() {
        let s = spec(784, &[1000, 1000, 10], 1.0, 0.0, 0.0);
        assert_eq!(s.stage_inputs(), vec![784, 1000, 1000]);
        assert_eq!(s.adder_widths(), vec![11, 11, 11]);
    }

    #[test]
    fn fit_recovers_known_constants() {
        let truth = [
            spec(784, &[250, 250, 10], 2e8, 12.5, 30.0),
            spec(784, &[600, 10], 2e8, 12.5, 30.0),
        ];
        let cal = fit_overheads((&truth[0], latency(&truth[0])), (&truth[1], latency(&truth[1]))).unwrap();
        assert!((cal.per_layer_overhead - 12.5).abs() < 1e-9);
        assert!((cal.pipeline_fill_overhead - 30.0).abs() < 1e-9);
    }

    #[test]
    fn empty_report_is_header_only() {
        let r = report(&[]).unwrap();
        assert_eq!(r.lines().count(), 2);
    }
}
