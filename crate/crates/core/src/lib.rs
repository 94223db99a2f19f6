//! Pedestrian corridor model: density-dependent Fokker–Planck forward solver,
//! McKean–Vlasov trajectory generation and Bayesian estimation of the free speed.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod fp;
pub mod geometry;
pub mod inference;
pub mod trajectories;

pub use error::{Error, Result};
pub use experiment::{run_pipeline, ExperimentConfig, RunManifest};
pub use fp::{DensityField, DensityHistory, DensitySource, ModelParams, SteadyProfile};
pub use geometry::{Bottleneck, DomainSpec, GridSpec, Point, Potential};
pub use inference::{
    DensityMode, InferenceConfig, Likelihood, PosteriorChain, PosteriorSummary, Prior,
};
pub use trajectories::{Ensemble, SdeConfig, Trajectory};
