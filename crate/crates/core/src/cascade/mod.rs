//! Supervised-descent cascade: training, inference and model persistence.

mod config;
pub mod engine;
mod model;
mod persist;
mod sample;

pub use config::{CascadeConfig, PerturbationRanges};
pub use engine::{perturb_initializations, Stage};
pub(crate) use model::normalize_all;
pub use model::{infer, train_sdm, CascadeModel, TrainingLog};
pub use persist::{MAGIC, VERSION};
pub use sample::{normalize_sample, NormalizedSample, TrainingSample};
