use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{DomainSpec, GridSpec, Point};

/// Anything that can report the density at a point and time.
///
/// `rho_max` is the density unit of the source; the scaled model uses 1.
pub trait DensitySource: Send + Sync {
    fn density_at(&self, p: Point, t: f64) -> Result<f64>;

    fn rho_max(&self) -> f64 {
        1.0
    }

    fn describe(&self) -> String;
}

/// One density snapshot on the grid.
#[derive(Debug, Clone)]
pub struct DensityField {
    pub grid: Arc<GridSpec>,
    pub rho: Vec<f64>,
    pub t: f64,
}

impl DensityField {
    pub fn zeros(grid: Arc<GridSpec>) -> Self {
        let n = grid.len();
        Self {
            grid,
            rho: vec![0.0; n],
            t: 0.0,
        }
    }

    pub fn uniform(grid: Arc<GridSpec>, value: f64) -> Self {
        let rho = (0..grid.len())
            .map(|k| if grid.is_inside(k) { value } else { 0.0 })
            .collect();
        Self { grid, rho, t: 0.0 }
    }

    pub fn mass(&self) -> f64 {
        mass(&self.grid, &self.rho)
    }
}

pub(crate) fn mass(grid: &GridSpec, rho: &[f64]) -> f64 {
    let area = grid.cell_area();
    rho.iter()
        .enumerate()
        .filter(|(k, _)| grid.is_inside(*k))
        .map(|(_, r)| r * area)
        .sum()
}

/// Per-step bookkeeping of a forward solve.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepReport {
    pub mass_before: f64,
    pub mass_after: f64,
    /// Boundary influx and outflux integrated over the faces, per unit time.
    pub influx: f64,
    pub outflux: f64,
    pub dt: f64,
    /// Cells clamped back into [0, ρ_max] and the largest correction applied.
    pub clamped: usize,
    pub max_overshoot: f64,
}

impl StepReport {
    /// Mass change minus the boundary flux budget.
    pub fn balance_residual(&self) -> f64 {
        (self.mass_after - self.mass_before) - self.dt * (self.influx - self.outflux)
    }
}

/// Density fields at uniform time steps `t_k = k dt`, starting from the empty corridor.
#[derive(Debug, Clone)]
pub struct DensityHistory {
    grid: Arc<GridSpec>,
    dt: f64,
    rho_max: f64,
    fields: Vec<Vec<f64>>,
    reports: Vec<StepReport>,
}

impl DensityHistory {
    pub(crate) fn new(grid: Arc<GridSpec>, dt: f64, rho_max: f64, initial: Vec<f64>) -> Self {
        Self {
            grid,
            dt,
            rho_max,
            fields: vec![initial],
            reports: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, rho: Vec<f64>, report: StepReport) {
        self.fields.push(rho);
        self.reports.push(report);
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        (self.fields.len() - 1) as f64 * self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn values(&self, k: usize) -> &[f64] {
        &self.fields[k]
    }

    pub fn field(&self, k: usize) -> DensityField {
        DensityField {
            grid: self.grid.clone(),
            rho: self.fields[k].clone(),
            t: self.time(k),
        }
    }

    pub fn last(&self) -> DensityField {
        self.field(self.fields.len() - 1)
    }

    pub fn reports(&self) -> &[StepReport] {
        &self.reports
    }

    pub fn clamp_events(&self) -> usize {
        self.reports.iter().map(|r| r.clamped).sum()
    }

    /// Lossless little-endian dump: dt, ρ_max, field count, cells, fields, reports.
    pub fn to_bytes(&self) -> Vec<u8> {
        let cells = self.grid.len();
        let mut out = Vec::with_capacity(8 * (4 + self.fields.len() * (cells + 7)));
        let mut put = |x: f64| out.extend_from_slice(&x.to_le_bytes());
        put(self.dt);
        put(self.rho_max);
        put(self.fields.len() as f64);
        put(cells as f64);
        for f in &self.fields {
            f.iter().for_each(|&x| put(x));
        }
        for r in &self.reports {
            for x in [
                r.mass_before,
                r.mass_after,
                r.influx,
                r.outflux,
                r.dt,
                r.clamped as f64,
                r.max_overshoot,
            ] {
                put(x);
            }
        }
        out
    }

    /// Inverse of [`DensityHistory::to_bytes`] on the same grid.
    pub fn from_bytes(grid: Arc<GridSpec>, bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::param("density cache", m.to_string());
        if !bytes.len().is_multiple_of(8) || bytes.len() < 32 {
            return Err(bad("truncated"));
        }
        let vals: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let (dt, rho_max, count, cells) = (vals[0], vals[1], vals[2] as usize, vals[3] as usize);
        if cells != grid.len() || count == 0 || vals.len() != 4 + count * cells + (count - 1) * 7 {
            return Err(bad("does not match the grid"));
        }
        let body = &vals[4..];
        let fields = body[..count * cells]
            .chunks_exact(cells)
            .map(|c| c.to_vec())
            .collect();
        let reports = body[count * cells..]
            .chunks_exact(7)
            .map(|r| StepReport {
                mass_before: r[0],
                mass_after: r[1],
                influx: r[2],
                outflux: r[3],
                dt: r[4],
                clamped: r[5] as usize,
                max_overshoot: r[6],
            })
            .collect();
        Ok(Self {
            grid,
            dt,
            rho_max,
            fields,
            reports,
        })
    }

    /// CSV rows `t,x,y,rho`, writing every `every`-th stored field.
    pub fn write_csv<W: Write>(&self, mut out: W, every: usize) -> std::io::Result<()> {
        writeln!(out, "t,x,y,rho")?;
        let every = every.max(1);
        for k in (0..self.fields.len()).filter(|k| k % every == 0 || *k + 1 == self.fields.len()) {
            let t = self.time(k);
            for c in (0..self.grid.len()).filter(|&c| self.grid.is_inside(c)) {
                let p = self.grid.center(c);
                writeln!(out, "{:.12e},{},{},{:.16e}", t, p.x, p.y, self.fields[k][c])?;
            }
        }
        Ok(())
    }
}

impl DensitySource for DensityHistory {
    /// Bilinear in space, linear in time between bracketing steps, clamped to [0, ρ_max].
    fn density_at(&self, p: Point, t: f64) -> Result<f64> {
        if !self.grid.domain.contains(p) {
            return Err(Error::OutsideDomain { x: p.x, y: p.y });
        }
        let horizon = self.horizon();
        if !(t >= -1e-12 && t <= horizon + 1e-9 * horizon.max(1.0)) {
            return Err(Error::OutsideHorizon { t, horizon });
        }
        let st = self.grid.stencil(p);
        let value = if self.fields.len() == 1 {
            st.apply(&self.fields[0])
        } else {
            let s = (t / self.dt).max(0.0);
            let k = (s.floor() as usize).min(self.fields.len() - 2);
            let theta = (s - k as f64).min(1.0);
            if theta == 0.0 {
                st.apply(&self.fields[k])
            } else {
                (1.0 - theta) * st.apply(&self.fields[k]) + theta * st.apply(&self.fields[k + 1])
            }
        };
        Ok(value.clamp(0.0, self.rho_max))
    }

    fn rho_max(&self) -> f64 {
        self.rho_max
    }

    fn describe(&self) -> String {
        format!(
            "transient FP history: {}x{} grid, dt = {}, horizon = {}, rho_max = {}",
            self.grid.nx,
            self.grid.ny,
            self.dt,
            self.horizon(),
            self.rho_max
        )
    }
}

/// 1D stationary profile along the corridor, constant across it.
#[derive(Debug, Clone)]
pub struct SteadyProfile {
    pub(crate) domain: DomainSpec,
    pub(crate) rho: Vec<f64>,
    pub(crate) residual: f64,
    pub(crate) iterations: usize,
}

impl SteadyProfile {
    pub fn values(&self) -> &[f64] {
        &self.rho
    }

    /// Little-endian dump: residual, iterations, node values.
    pub fn to_bytes(&self) -> Vec<u8> {
        [self.residual, self.iterations as f64]
            .iter()
            .chain(&self.rho)
            .flat_map(|x| x.to_le_bytes())
            .collect()
    }

    pub fn from_bytes(domain: DomainSpec, bytes: &[u8]) -> Result<Self> {
        if !bytes.len().is_multiple_of(8) || bytes.len() < 5 * 8 {
            return Err(Error::param("steady cache", "truncated"));
        }
        let vals: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(Self {
            domain,
            residual: vals[0],
            iterations: vals[1] as usize,
            rho: vals[2..].to_vec(),
        })
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn spacing(&self) -> f64 {
        self.domain.length / (self.rho.len() - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    /// Linear interpolation in x.
    pub fn at_x(&self, x: f64) -> f64 {
        let s = (x / self.spacing()).clamp(0.0, (self.rho.len() - 1) as f64);
        let i = (s.floor() as usize).min(self.rho.len() - 2);
        let f = s - i as f64;
        let v = if f == 0.0 {
            self.rho[i]
        } else {
            (1.0 - f) * self.rho[i] + f * self.rho[i + 1]
        };
        v.clamp(0.0, 1.0)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,rho")?;
        for (i, r) in self.rho.iter().enumerate() {
            writeln!(out, "{:.12e},{:.16e}", self.node(i), r)?;
        }
        Ok(())
    }
}

impl DensitySource for SteadyProfile {
    fn density_at(&self, p: Point, _t: f64) -> Result<f64> {
        if !self.domain.contains(p) {
            return Err(Error::OutsideDomain { x: p.x, y: p.y });
        }
        Ok(self.at_x(p.x))
    }

    fn describe(&self) -> String {
        format!(
            "steady 1D profile: {} nodes, residual {:e}",
            self.rho.len(),
            self.residual
        )
    }
}

/// Spatially and temporally constant density; useful for closed-form checks.
#[derive(Debug, Clone)]
pub struct FrozenDensity {
    pub domain: DomainSpec,
    pub value: f64,
}

impl DensitySource for FrozenDensity {
    fn density_at(&self, p: Point, _t: f64) -> Result<f64> {
        if !self.domain.contains(p) {
            return Err(Error::OutsideDomain { x: p.x, y: p.y });
        }
        Ok(self.value)
    }

    fn describe(&self) -> String {
        format!("frozen density {}", self.value)
    }
}

/// Presents a scaled source in unscaled units: ρ = ρ_max · ρ̃.
pub struct UnscaledView<S> {
    pub scaled: S,
    pub rho_max: f64,
}

impl<S: DensitySource> DensitySource for UnscaledView<S> {
    fn density_at(&self, p: Point, t: f64) -> Result<f64> {
        Ok(self.rho_max * self.scaled.density_at(p, t)?)
    }

    fn rho_max(&self) -> f64 {
        self.rho_max
    }

    fn describe(&self) -> String {
        format!(
            "{} scaled by rho_max = {}",
            self.scaled.describe(),
            self.rho_max
        )
    }
}

/// Density of any source at `(p, t)`.
pub fn sample_density(source: &dyn DensitySource, p: Point, t: f64) -> Result<f64> {
    source.density_at(p, t)
}
