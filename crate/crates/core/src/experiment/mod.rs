//! Experiment orchestration: configuration, presets, pipelines and sweeps.

mod config;
mod pipeline;

pub use config::{load_config, Estimator, ExperimentConfig, ModelSpec, RunSpec, PRESETS};
pub use pipeline::{
    build_likelihood, forward_density, run_pipeline, sweep, Estimates, FileEntry, ForwardDensity,
    MapOutcome, RunManifest, Seeds, StageTiming,
};
