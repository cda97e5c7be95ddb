//! Teacher-to-student conversion, one neuron at a time.
//!
//! For every teacher neuron the student picks two weight thresholds that
//! map the real weights to {-1, 0, +1}, then two integer firing thresholds
//! placed where the kernel densities of its transfer outputs, grouped by
//! the teacher's outputs, cross. Candidate weight thresholds form a grid
//! searched exhaustively or by a pivot search that discards a third per
//! step.

mod kde;
mod layer;
mod report;
mod score;
mod search;
mod student;
mod thresholds;
mod weights;

pub use kde::{kde_estimate, kde_log_density, silverman_bandwidth, MIN_BANDWIDTH};
pub use layer::{
    select_probes, teacher_targets, ternarize_layer, ternarize_network, ternarize_output_layer, LayerResult,
    NetworkResult, NeuronReport, OutputResult, TernarizeConfig,
};
pub use report::{neuron_report_csv, NEURON_REPORT_SCHEMA};
pub use score::{score_config, score_config_full, NeuronSurface, NeuronTargets, ProbeInputs, Surface};
pub use search::{dichotomic_search, exhaustive_search, search_with_fallback, Found, SearchKind, SearchOutcome};
pub use student::{StudentLayer, StudentNeuron};
pub use thresholds::{output_thresholds, ActivationRecord};
pub use weights::{ternarize_weights, GridPolicy, TernConfig, WeightGrid};
