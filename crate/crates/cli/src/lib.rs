//! Pipeline orchestration, run manifests and the command-line front end.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;
pub mod sweep;

pub use config::{load_config, AggregationMethod, PipelineConfig, Segmenter};
pub use error::{CliError, CliResult};
pub use manifest::Manifest;
pub use pipeline::{execute, run_pipeline, RunOutput};
pub use sweep::{run_sweep, SweepConfig, SweepRow};
