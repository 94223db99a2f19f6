//! Forward model: the scaled density equation in 2D and its 1D stationary profile.

mod banded;
mod density;
mod diagnostics;
mod imex;
mod params;
mod steady;

pub use banded::{BandCholesky, SymBand};
pub use density::{
    sample_density, DensityField, DensityHistory, DensitySource, FrozenDensity, SteadyProfile,
    StepReport, UnscaledView,
};
pub use diagnostics::{classify_regime, entropy, Regime};
pub use imex::{cfl_limit, solve_fp, solve_fp_with, step_fp, ForwardOptions, FpOperator};
pub use params::{velocity, velocity_unscaled, ModelParams};
pub use steady::{steady_state_1d, DEFAULT_STEADY_NODES};
