//! Experiment orchestration for the careerpath simulator: configuration,
//! the staged pipeline, artifact persistence and recommendations.

pub mod artifacts;
pub mod config;
pub mod pipeline;
pub mod recommend;

pub use config::{ConfigError, ExperimentConfig, SeedStreams};
pub use pipeline::{PipelineError, TrainedPolicy, Workspace};
