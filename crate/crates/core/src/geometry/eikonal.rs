//! Walking-distance potential from the eikonal equation |∇φ| = 1, φ = 0 on the exit door.
//!
//! First-order Godunov upwind discretization solved by fast sweeping (four
//! alternating Gauss-Seidel orderings per iteration). Walls and masked cells are
//! non-traversable. Door cells are pinned at half a cell width from the exit face.

use std::io::Write;
use std::sync::Arc;

use super::domain::{BoundaryKind, Point};
use super::grid::{GridSpec, Side};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 10_000;

/// Distance-to-exit field and the unit walking direction -∇φ/|∇φ| per cell.
#[derive(Debug, Clone)]
pub struct Potential {
    grid: Arc<GridSpec>,
    phi: Vec<f64>,
    direction: Vec<Point>,
    uniform: bool,
}

impl Potential {
    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn directions(&self) -> &[Point] {
        &self.direction
    }

    /// Interpolated φ; on the last half cell in front of the door it falls linearly to 0 at x = L.
    pub fn phi_at(&self, p: Point) -> Result<f64> {
        let g = &self.grid;
        if !g.domain.contains(p) {
            return Err(Error::OutsideDomain { x: p.x, y: p.y });
        }
        let last = g.x_center(g.nx - 1);
        let value = g.stencil(p).apply(&self.phi);
        if p.x > last && p.y.abs() <= g.domain.door_half_width() {
            let s = (g.domain.length - p.x) / (g.domain.length - last);
            return Ok(value * s);
        }
        Ok(value)
    }

    /// Bilinear interpolation of the per-cell direction field, renormalized.
    pub fn drift_direction_at(&self, p: Point) -> Result<Point> {
        if !self.grid.domain.contains(p) {
            return Err(Error::OutsideDomain { x: p.x, y: p.y });
        }
        Ok(self.direction_unchecked(p))
    }

    /// As [`drift_direction_at`](Self::drift_direction_at) without the containment check;
    /// points outside are clamped onto the grid.
    pub fn direction_unchecked(&self, p: Point) -> Point {
        if self.uniform {
            return self.direction[0];
        }
        let st = self.grid.stencil(p);
        let mut d = Point::default();
        for (k, w) in st.iter() {
            d = d + self.direction[k] * w;
        }
        let n = d.norm();
        if n > 0.0 {
            d * (1.0 / n)
        } else {
            Point::new(1.0, 0.0)
        }
    }

    /// CSV rows `x,y,phi,gx,gy` over inside cells, where (gx, gy) is the walking direction.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,y,phi,gx,gy")?;
        for k in (0..self.grid.len()).filter(|&k| self.grid.is_inside(k)) {
            let c = self.grid.center(k);
            let d = self.direction[k];
            writeln!(
                out,
                "{},{},{:.16e},{:.16e},{:.16e}",
                c.x, c.y, self.phi[k], d.x, d.y
            )?;
        }
        Ok(())
    }
}

/// Godunov update for cell distance given the upwind neighbor minima `a` (x) and `b` (y).
fn godunov_update(a: f64, b: f64, dx: f64, dy: f64) -> f64 {
    if !a.is_finite() && !b.is_finite() {
        return f64::INFINITY;
    }
    if a + dx <= b {
        return a + dx;
    }
    if b + dy <= a {
        return b + dy;
    }
    let (dx2, dy2) = (dx * dx, dy * dy);
    let disc = dx2 + dy2 - (a - b) * (a - b);
    (a * dy2 + b * dx2 + dx * dy * disc.max(0.0).sqrt()) / (dx2 + dy2)
}

pub fn solve_eikonal(grid: Arc<GridSpec>) -> Result<Potential> {
    let g = &*grid;
    let n = g.len();
    let mut phi = vec![f64::INFINITY; n];
    let mut fixed = vec![false; n];
    for face in g
        .boundary_faces()
        .iter()
        .filter(|f| f.kind == BoundaryKind::Outflow)
    {
        phi[face.cell] = 0.5 * g.dx;
        fixed[face.cell] = true;
    }
    if !fixed.iter().any(|&f| f) {
        return Err(Error::UnreachableExit);
    }

    let tol = 1e-10 * g.dx;
    let (nx, ny) = (g.nx, g.ny);
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut change: f64 = 0.0;
        for order in 0..4 {
            for ii in 0..nx {
                let i = if order & 1 == 0 { ii } else { nx - 1 - ii };
                for jj in 0..ny {
                    let j = if order & 2 == 0 { jj } else { ny - 1 - jj };
                    let k = g.index(i, j);
                    if fixed[k] || !g.is_inside(k) {
                        continue;
                    }
                    let val = |side| g.neighbor(k, side).map_or(f64::INFINITY, |m| phi[m]);
                    let a = val(Side::West).min(val(Side::East));
                    let b = val(Side::South).min(val(Side::North));
                    let cand = godunov_update(a, b, g.dx, g.dy);
                    if cand < phi[k] {
                        let delta = if phi[k].is_finite() {
                            phi[k] - cand
                        } else {
                            f64::INFINITY
                        };
                        change = change.max(delta);
                        phi[k] = cand;
                    }
                }
            }
        }
        if change < tol {
            converged = true;
            break;
        }
    }
    if !converged || (0..n).any(|k| g.is_inside(k) && !phi[k].is_finite()) {
        return Err(Error::UnreachableExit);
    }
    for (k, v) in phi.iter_mut().enumerate() {
        if !g.is_inside(k) {
            *v = 0.0;
        }
    }

    let direction: Vec<Point> = (0..n)
        .map(|k| {
            if g.is_inside(k) {
                walking_direction(g, &phi, k)
            } else {
                Point::default()
            }
        })
        .collect();
    let uniform = direction
        .iter()
        .enumerate()
        .all(|(k, &d)| !g.is_inside(k) || d == Point::new(1.0, 0.0));
    Ok(Potential {
        grid,
        phi,
        direction,
        uniform,
    })
}

/// Normalized -∇φ with central differences, one-sided next to walls and masked cells.
fn walking_direction(g: &GridSpec, phi: &[f64], k: usize) -> Point {
    let diff = |lo: Option<usize>, hi: Option<usize>, h: f64| match (lo, hi) {
        (Some(l), Some(r)) => (phi[r] - phi[l]) / (2.0 * h),
        (Some(l), None) => (phi[k] - phi[l]) / h,
        (None, Some(r)) => (phi[r] - phi[k]) / h,
        (None, None) => 0.0,
    };
    let gx = diff(g.neighbor(k, Side::West), g.neighbor(k, Side::East), g.dx);
    let gy = diff(g.neighbor(k, Side::South), g.neighbor(k, Side::North), g.dy);
    let norm = gx.hypot(gy);
    if norm > 0.0 {
        // `+ 0.0` turns -0.0 into +0.0
        Point::new(-gx / norm + 0.0, -gy / norm + 0.0)
    } else {
        Point::new(1.0, 0.0)
    }
}
