//! Euler–Maruyama step and the partially reflecting boundary rules.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::Result;
use crate::fp::{velocity_unscaled, DensitySource, ModelParams};
use crate::geometry::{BoundaryKind, DomainSpec, Point, Segment};

const MAX_REFLECTIONS: usize = 10;

/// What happened to a walker after boundary handling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryOutcome {
    Inside(Point),
    /// Left through the exit door at the given crossing point.
    Exited(Point),
    /// Waiting walker did not get in this step.
    StillWaiting,
    /// Too many successive reflections in one step; the caller redraws the noise.
    Rejected,
}

/// Counters for probabilities that had to be clamped into [0, 1].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct BoundaryStats {
    pub probability_clamps: u32,
    pub rejected_steps: u32,
}

/// Drift `F = v_max (1 - ρ/ρ_max) d(x)` at `(x, t)`.
pub fn drift(x: Point, t: f64, density: &dyn DensitySource, params: &ModelParams) -> Result<Point> {
    let rho = density.density_at(x, t)?;
    let speed = velocity_unscaled(params.v_max, rho, density.rho_max());
    if speed == 0.0 {
        return Ok(Point::default());
    }
    Ok(params.potential.drift_direction_at(x)? * speed)
}

/// One Euler–Maruyama step before boundary handling, with noise strengths from `params`.
pub fn em_step(
    x: Point,
    t: f64,
    density: &dyn DensitySource,
    params: &ModelParams,
    dt: f64,
    noise: (f64, f64),
) -> Result<Point> {
    let f = drift(x, t, density, params)?;
    let s1 = (2.0 * params.sigma1 * params.sigma1 * dt).sqrt();
    let s2 = (2.0 * params.sigma2 * params.sigma2 * dt).sqrt();
    Ok(Point::new(
        x.x + f.x * dt + s1 * noise.0,
        x.y + f.y * dt + s2 * noise.1,
    ))
}

fn clamp_probability(p: f64, stats: &mut BoundaryStats) -> f64 {
    if (0.0..=1.0).contains(&p) {
        p
    } else {
        stats.probability_clamps += 1;
        p.clamp(0.0, 1.0)
    }
}

/// Exit probability `√(π dt / σ1²) · b · ρ/ρ_max` at the door point `at`.
pub fn exit_probability(
    at: Point,
    t: f64,
    density: &dyn DensitySource,
    params: &ModelParams,
    dt: f64,
) -> Result<f64> {
    let rho = density.density_at(at, t)? / density.rho_max();
    Ok((PI * dt / (params.sigma1 * params.sigma1)).sqrt() * params.b * rho)
}

/// Entry probability `√(π dt / (2σ1²)) · a · (1 - ρ/ρ_max)` at the entrance point `at`.
pub fn entry_probability(
    at: Point,
    t: f64,
    density: &dyn DensitySource,
    params: &ModelParams,
    dt: f64,
) -> Result<f64> {
    let rho = density.density_at(at, t)? / density.rho_max();
    Ok((PI * dt / (2.0 * params.sigma1 * params.sigma1)).sqrt() * params.a * (1.0 - rho))
}

/// Outward normal of a counter-clockwise segment.
fn outward_normal(s: &Segment) -> Point {
    let d = s.to - s.from;
    let n = d.norm();
    Point::new(d.y / n, -d.x / n)
}

fn dot(a: Point, b: Point) -> f64 {
    a.x * b.x + a.y * b.y
}

/// First segment the path `from -> to` leaves the domain through, with the hit point.
fn first_crossing(segments: &[Segment], from: Point, to: Point) -> Option<(Segment, Point)> {
    let mut best: Option<(f64, Segment, Point)> = None;
    for s in segments {
        let n = outward_normal(s);
        let start = dot(from - s.from, n);
        let end = dot(to - s.from, n);
        if !(end > 0.0 && start <= 0.0) {
            continue;
        }
        let frac = -start / (end - start);
        let mut hit = from + (to - from) * frac;
        // snap onto the segment line
        if s.is_vertical() {
            hit.x = s.from.x;
            let (lo, hi) = (s.from.y.min(s.to.y), s.from.y.max(s.to.y));
            if hit.y < lo || hit.y > hi {
                continue;
            }
        } else {
            hit.y = s.from.y;
            let (lo, hi) = (s.from.x.min(s.to.x), s.from.x.max(s.to.x));
            if hit.x < lo || hit.x > hi {
                continue;
            }
        }
        if best.as_ref().is_none_or(|b| frac < b.0) {
            best = Some((frac, *s, hit));
        }
    }
    best.map(|(_, s, p)| (s, p))
}

fn reflect(p: Point, s: &Segment) -> Point {
    if s.is_vertical() {
        Point::new(2.0 * s.from.x - p.x, p.y)
    } else {
        Point::new(p.x, 2.0 * s.from.y - p.y)
    }
}

/// Resolves boundary crossings of the step `x_old -> x_new` for a walker in the domain.
///
/// Walls reflect specularly. The exit door lets the walker leave with the exit
/// probability and reflects otherwise; crossing the entrance from inside puts the
/// walker back on the entrance line with the entry probability and reflects otherwise.
#[allow(clippy::too_many_arguments)]
pub fn apply_boundary<R: Rng + ?Sized>(
    x_old: Point,
    x_new: Point,
    t: f64,
    density: &dyn DensitySource,
    params: &ModelParams,
    dt: f64,
    rng: &mut R,
    stats: &mut BoundaryStats,
) -> Result<BoundaryOutcome> {
    let domain: &DomainSpec = &params.potential.grid().domain;
    let segments = domain.segments();
    let (mut from, mut to) = (x_old, x_new);
    for _ in 0..=MAX_REFLECTIONS {
        if domain.contains(to) {
            return Ok(BoundaryOutcome::Inside(to));
        }
        let Some((seg, hit)) = first_crossing(&segments, from, to) else {
            return Ok(BoundaryOutcome::Rejected);
        };
        match seg.kind {
            BoundaryKind::Wall => {}
            BoundaryKind::Outflow => {
                let p = clamp_probability(exit_probability(hit, t, density, params, dt)?, stats);
                if rng.random::<f64>() < p {
                    return Ok(BoundaryOutcome::Exited(hit));
                }
            }
            BoundaryKind::Inflow => {
                let p = clamp_probability(entry_probability(hit, t, density, params, dt)?, stats);
                if rng.random::<f64>() < p {
                    return Ok(BoundaryOutcome::Inside(hit));
                }
            }
        }
        from = hit;
        to = reflect(to, &seg);
    }
    Ok(BoundaryOutcome::Rejected)
}

/// Entry attempt of a walker waiting in front of the entrance at ordinate `y`.
pub fn attempt_entry<R: Rng + ?Sized>(
    y: f64,
    t: f64,
    density: &dyn DensitySource,
    params: &ModelParams,
    dt: f64,
    rng: &mut R,
    stats: &mut BoundaryStats,
) -> Result<BoundaryOutcome> {
    let at = Point::new(0.0, y);
    let p = clamp_probability(entry_probability(at, t, density, params, dt)?, stats);
    if p > 0.0 && rng.random::<f64>() < p {
        Ok(BoundaryOutcome::Inside(at))
    } else {
        Ok(BoundaryOutcome::StillWaiting)
    }
}
