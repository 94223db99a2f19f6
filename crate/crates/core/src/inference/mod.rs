//! Estimation of v_max from trajectories: Girsanov likelihood, MAP by Nelder–Mead
//! and posterior sampling by pCN.

mod estimate;
mod export;
mod likelihood;

pub use estimate::{
    default_burn_in, nelder_mead, nelder_mead_fn, objective, pcn_sample, pcn_sample_fn,
    posterior_summary, Histogram, MapResult, PosteriorChain, PosteriorSummary, Prior, TraceEntry,
};
pub use export::{write_chain_csv, write_map_trace_csv, write_summary};
pub use likelihood::{
    psi_ensemble, psi_single, DensityMode, ForwardModel, ForwardSigma, FrozenForward,
    InferenceConfig, Likelihood, SteadyForward, TransientForward,
};
