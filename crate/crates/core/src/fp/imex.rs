//! Finite-volume IMEX stepper for the density equation
//! ∂tρ = div(Σ∇ρ − g(ρ) d), g(ρ) = v ρ (1 − ρ/ρ_max),
//! with Robin fluxes on the inflow and outflow faces and zero flux on walls.
//!
//! Convection is explicit (Godunov flux on interior faces), diffusion and the
//! boundary fluxes are backward Euler. The implicit matrix is a symmetric
//! M-matrix, so the step preserves the box [0, ρ_max] under the CFL bound.

use std::sync::Arc;

use log::{debug, warn};

use super::banded::{BandCholesky, SymBand};
use super::density::{mass, DensityField, DensityHistory, StepReport};
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::geometry::{BoundaryKind, GridSpec, Side};

/// Options for [`solve_fp_with`].
#[derive(Debug, Clone, Copy)]
pub struct ForwardOptions {
    /// Density unit. Values other than 1 run the unscaled model with inflow a(ρ_max − ρ).
    pub rho_max: f64,
    /// Split each stored step into the fewest equal substeps that satisfy the CFL bound
    /// instead of failing.
    pub auto_substep: bool,
}

impl Default for ForwardOptions {
    fn default() -> Self {
        Self {
            rho_max: 1.0,
            auto_substep: false,
        }
    }
}

/// Largest stable convective step `0.5 min(dx, dy) / v_max`.
pub fn cfl_limit(grid: &GridSpec, v_max: f64) -> f64 {
    0.5 * grid.dx.min(grid.dy) / v_max
}

#[derive(Debug, Clone, Copy)]
struct Face {
    left: usize,
    right: usize,
    /// Drift component along the face normal (from `left` to `right`).
    dn: f64,
    /// Face length over cell area.
    weight: f64,
}

/// Precomputed step operator for fixed parameters and time step.
pub struct FpOperator {
    grid: Arc<GridSpec>,
    dt: f64,
    v_max: f64,
    rho_max: f64,
    faces: Vec<Face>,
    /// Implicit coupling dt·σ²/h² per interior face, in `faces` order.
    coupling: Vec<f64>,
    diag: Vec<f64>,
    /// Σ a·len/area and Σ b·len/area over each cell's boundary faces.
    inflow: Vec<f64>,
    outflow: Vec<f64>,
    inflow_len: Vec<f64>,
    outflow_len: Vec<f64>,
    chol: BandCholesky,
}

impl FpOperator {
    pub fn new(params: &ModelParams, dt: f64, rho_max: f64) -> Result<Self> {
        params.validate()?;
        if !(rho_max > 0.0 && rho_max.is_finite()) {
            return Err(Error::param(
                "rho_max",
                format!("must be positive, got {rho_max}"),
            ));
        }
        let grid = params.potential.grid().clone();
        let limit = cfl_limit(&grid, params.v_max);
        if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
            return Err(Error::Cfl { dt, limit });
        }

        let g = &*grid;
        let n = g.len();
        let area = g.cell_area();
        let dir = params.potential.directions();
        let cx = params.sigma1 * params.sigma1 / (g.dx * g.dx);
        let cy = params.sigma2 * params.sigma2 / (g.dy * g.dy);

        let mut matrix = SymBand::zeros(n, g.ny);
        let mut faces = Vec::with_capacity(2 * n);
        let mut coupling = Vec::with_capacity(2 * n);
        let mut diag = vec![1.0; n];
        for k in 0..n {
            if !g.is_inside(k) {
                matrix.add(k, k, 1.0);
                continue;
            }
            matrix.add(k, k, 1.0);
            for side in [Side::East, Side::North] {
                let Some(m) = g.neighbor(k, side) else {
                    continue;
                };
                let (c, dn, weight) = match side {
                    Side::East => (cx, 0.5 * (dir[k].x + dir[m].x), g.dy / area),
                    _ => (cy, 0.5 * (dir[k].y + dir[m].y), g.dx / area),
                };
                matrix.add(k, k, dt * c);
                matrix.add(m, m, dt * c);
                matrix.add(m, k, -dt * c);
                diag[k] += dt * c;
                diag[m] += dt * c;
                faces.push(Face {
                    left: k,
                    right: m,
                    dn,
                    weight,
                });
                coupling.push(dt * c);
            }
        }

        let mut inflow = vec![0.0; n];
        let mut outflow = vec![0.0; n];
        let mut inflow_len = vec![0.0; n];
        let mut outflow_len = vec![0.0; n];
        for f in g.boundary_faces() {
            match f.kind {
                BoundaryKind::Inflow => {
                    inflow[f.cell] += params.a * f.length / area;
                    inflow_len[f.cell] += f.length;
                }
                BoundaryKind::Outflow => {
                    outflow[f.cell] += params.b * f.length / area;
                    outflow_len[f.cell] += f.length;
                }
                BoundaryKind::Wall => {}
            }
        }
        for k in 0..n {
            matrix.add(k, k, dt * (inflow[k] + outflow[k]));
            diag[k] += dt * (inflow[k] + outflow[k]);
        }
        let chol = BandCholesky::factor(&matrix)?;

        Ok(Self {
            grid,
            dt,
            v_max: params.v_max,
            rho_max,
            faces,
            coupling,
            diag,
            inflow,
            outflow,
            inflow_len,
            outflow_len,
            chol,
        })
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    #[inline]
    fn flux_fn(&self, rho: f64) -> f64 {
        self.v_max * rho * (1.0 - rho / self.rho_max)
    }

    /// Godunov flux of the concave g for left state `l` and right state `r`.
    #[inline]
    fn godunov(&self, l: f64, r: f64) -> f64 {
        let half = 0.5 * self.rho_max;
        self.flux_fn(l.min(half)).min(self.flux_fn(r.max(half)))
    }

    /// Product with the implicit matrix, assembled face by face.
    fn apply_implicit(&self, x: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = x.iter().zip(&self.diag).map(|(x, d)| x * d).collect();
        for (f, c) in self.faces.iter().zip(&self.coupling) {
            out[f.left] -= c * x[f.right];
            out[f.right] -= c * x[f.left];
        }
        out
    }

    /// Advances `rho` by one step in place (masked cells are left at zero).
    pub fn step(&self, rho: &mut [f64]) -> Result<StepReport> {
        let g = &*self.grid;
        let n = g.len();
        assert_eq!(rho.len(), n, "density length does not match the grid");
        let mass_before = mass(g, rho);

        let mut rhs = rho.to_vec();
        for f in self.faces.iter().filter(|f| f.dn != 0.0) {
            let (l, r) = (rho[f.left], rho[f.right]);
            let flux = if f.dn >= 0.0 {
                f.dn * self.godunov(l, r)
            } else {
                f.dn * self.godunov(r, l)
            };
            if flux != 0.0 {
                let q = self.dt * f.weight * flux;
                rhs[f.left] -= q;
                rhs[f.right] += q;
            }
        }
        for k in 0..n {
            if self.inflow[k] != 0.0 {
                rhs[k] += self.dt * self.inflow[k] * self.rho_max;
            }
        }

        let mut x = rhs.clone();
        self.chol.solve_in_place(&mut x);
        let ax = self.apply_implicit(&x);
        let scale = rhs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let residual = ax
            .iter()
            .zip(&rhs)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if !(residual <= 1e-12 * scale) {
            return Err(Error::LinearSolve { residual });
        }

        let mut clamped = 0;
        let mut max_overshoot: f64 = 0.0;
        for (k, v) in x.iter_mut().enumerate() {
            if !g.is_inside(k) {
                *v = 0.0;
                continue;
            }
            let c = v.clamp(0.0, self.rho_max);
            if c != *v {
                clamped += 1;
                max_overshoot = max_overshoot.max((c - *v).abs());
                *v = c;
            }
        }
        if clamped > 0 {
            debug!("clamped {clamped} cells (max overshoot {max_overshoot:e})");
        }

        let mut influx = 0.0;
        let mut outflux = 0.0;
        for k in 0..n {
            if self.inflow_len[k] != 0.0 {
                influx += self.inflow[k] * g.cell_area() * (self.rho_max - x[k]);
            }
            if self.outflow_len[k] != 0.0 {
                outflux += self.outflow[k] * g.cell_area() * x[k];
            }
        }
        rho.copy_from_slice(&x);
        Ok(StepReport {
            mass_before,
            mass_after: mass(g, rho),
            influx,
            outflux,
            dt: self.dt,
            clamped,
            max_overshoot,
        })
    }
}

/// One IMEX step of the scaled model.
pub fn step_fp(field: &DensityField, params: &ModelParams, dt: f64) -> Result<DensityField> {
    let op = FpOperator::new(params, dt, 1.0)?;
    let mut rho = field.rho.clone();
    op.step(&mut rho)?;
    Ok(DensityField {
        grid: field.grid.clone(),
        rho,
        t: field.t + dt,
    })
}

/// Forward solve of the scaled model from the empty corridor, storing every step.
pub fn solve_fp(params: &ModelParams, t_end: f64, dt: f64) -> Result<DensityHistory> {
    solve_fp_with(params, None, t_end, dt, ForwardOptions::default())
}

/// Forward solve from the given initial condition (the empty corridor if `None`).
pub fn solve_fp_with(
    params: &ModelParams,
    initial: Option<&[f64]>,
    t_end: f64,
    dt: f64,
    opts: ForwardOptions,
) -> Result<DensityHistory> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::param(
            "T",
            format!("must be non-negative, got {t_end}"),
        ));
    }
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    let steps_f = t_end / dt;
    let steps = steps_f.round() as usize;
    if (steps_f - steps as f64).abs() > 1e-9 * steps_f.max(1.0) {
        return Err(Error::param(
            "dt",
            format!("horizon {t_end} is not a multiple of dt = {dt}"),
        ));
    }

    let grid = params.potential.grid().clone();
    let limit = cfl_limit(&grid, params.v_max);
    let substeps = if opts.auto_substep {
        (dt / limit * (1.0 - 1e-12)).ceil().max(1.0) as usize
    } else {
        1
    };
    let inner = dt / substeps as f64;
    if substeps > 1 {
        debug!("v_max = {}: {substeps} substeps of {inner}", params.v_max);
    }
    let op = FpOperator::new(params, inner, opts.rho_max)?;

    let mut rho = match initial {
        Some(r) => {
            if r.len() != grid.len() {
                return Err(Error::param("initial", "length does not match the grid"));
            }
            r.to_vec()
        }
        None => vec![0.0; grid.len()],
    };
    let mut history = DensityHistory::new(grid, dt, opts.rho_max, rho.clone());
    let mut clamp_total = 0;
    for _ in 0..steps {
        let mut report = op.step(&mut rho)?;
        for _ in 1..substeps {
            let r = op.step(&mut rho)?;
            report.mass_after = r.mass_after;
            report.influx += r.influx;
            report.outflux += r.outflux;
            report.clamped += r.clamped;
            report.max_overshoot = report.max_overshoot.max(r.max_overshoot);
        }
        // fluxes become averages over the full step
        report.influx /= substeps as f64;
        report.outflux /= substeps as f64;
        report.dt = dt;
        clamp_total += report.clamped;
        history.push(rho.clone(), report);
    }
    if clamp_total > 0 {
        warn!("forward solve clamped {clamp_total} cell values");
    }
    Ok(history)
}
