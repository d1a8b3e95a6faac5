//! Experiment runner for stress-map reconstruction: configuration files,
//! single runs with on-disk artifacts, noise sweeps, configuration
//! comparisons and heatmap export.

pub mod config;
pub mod error;
pub mod experiments;
pub mod heatmap;
pub mod pipeline;

pub use config::{default_config, default_configs, ExperimentConfig, GridSpec, GroundTruth, Mode};
pub use error::{Result, Stage, WorkbenchError};
pub use experiments::{compare_configs, sweep_noise, ComparisonRow, SweepTable};
pub use heatmap::{export_heatmap, Render};
pub use pipeline::{run_experiment, RunArtifacts};

/// Parses `"z"` or `"x"`.
pub fn parse_component(s: &str) -> std::result::Result<rft_inverse::Component, String> {
    match s {
        "z" => Ok(rft_inverse::Component::Z),
        "x" => Ok(rft_inverse::Component::X),
        other => Err(format!("unknown component {other:?}, expected z or x")),
    }
}
