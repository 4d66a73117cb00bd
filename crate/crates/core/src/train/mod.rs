//! Optimization: Adam with parameter groups, confidence-steered densification
//! and the training loop.

mod adam;
mod dataset;
mod densify;
mod output;
mod trainer;

pub use adam::{AdamConfig, FlatAdam, GaussianAdam, LearningRates};
pub use dataset::{init_from_points, Dataset};
pub use densify::{densify_and_prune, effective_threshold, DensifyConfig, DensifyOutcome};
pub use output::{train_to_dir, TrainArtifacts};
pub use trainer::{random_points, train, DensifyEvent, IterationRecord, TrainConfig, TrainOutput, Trainer};
