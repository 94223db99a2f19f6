//! Pedestrian paths from the density-coupled SDE, Euler–Maruyama with
//! partially reflecting entrance and exit.

mod ensemble;
mod io;
mod step;

pub use ensemble::{
    generate_ensemble, simulate_walker, Ensemble, Provenance, SdeConfig, Trajectory,
};
pub use io::{load_ensemble, save_ensemble, sidecar_path, write_sidecar, write_trajectories_csv};
pub use step::{
    apply_boundary, attempt_entry, drift, em_step, entry_probability, exit_probability,
    BoundaryOutcome, BoundaryStats,
};
