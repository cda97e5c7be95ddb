//! The real-valued teacher network with stochastically firing ternary neurons.

mod model;
mod train;

pub use model::{stochastic_fire, ternary_probs, transfer, DenseLayer, RealMlp, TernaryDist, TrainingInfo};
pub use train::{
    backprop, fine_tune, staggered_retrain, train_teacher, EpochMetrics, Firing, Gradients, TrainConfig, TrainOutcome,
};
