use std::fmt::Write as _;

use super::layer::NeuronReport;

pub const NEURON_REPORT_SCHEMA: &str = "tnn.neurons.v1";

/// Per-neuron diagnostics as CSV, preceded by a schema comment line.
pub fn neuron_report_csv(reports: &[NeuronReport]) -> String {
    let mut out = format!("# schema={NEURON_REPORT_SCHEMA}\n");
    out.push_str(
        "layer,neuron,sweep,search,score,normalized_score,dichotomic_score,evaluations,grid_rows,grid_cols,t_lo,t_hi,b_lo,b_hi,nonzeros,adopted\n",
    );
    for r in reports {
        let dich = r.dichotomic_score.map(|s| s.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.layer,
            r.neuron,
            r.sweep,
            r.kind.name(),
            r.score,
            r.normalized_score,
            dich,
            r.evaluations,
            r.grid_rows,
            r.grid_cols,
            r.t_lo,
            r.t_hi,
            r.b_lo,
            r.b_hi,
            r.nonzeros,
            r.adopted
        )
        .expect("writing to a String");
    }
    out
}
