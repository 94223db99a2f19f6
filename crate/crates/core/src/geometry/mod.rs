//! Corridor and bottleneck geometry, its structured grid, and the eikonal walking potential.

mod domain;
mod eikonal;
mod grid;

use std::sync::Arc;

pub use domain::{Bottleneck, BoundaryKind, DomainSpec, Point, Segment};
pub use eikonal::{solve_eikonal, Potential};
pub use grid::{BoundaryFace, GridSpec, Side, Stencil};

use crate::error::Result;

pub fn build_grid(domain: DomainSpec, nx: usize, ny: usize) -> Result<GridSpec> {
    GridSpec::build(domain, nx, ny)
}

/// Grid plus potential in one step, the usual way to set up a geometry.
pub fn potential_for(domain: DomainSpec, nx: usize, ny: usize) -> Result<Arc<Potential>> {
    let grid = Arc::new(GridSpec::build(domain, nx, ny)?);
    Ok(Arc::new(solve_eikonal(grid)?))
}
