use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::step::{apply_boundary, attempt_entry, em_step, BoundaryOutcome, BoundaryStats};
use crate::error::{Error, Result};
use crate::fp::{DensitySource, ModelParams};
use crate::geometry::Point;

/// Redraws allowed for a step that keeps bouncing between walls.
const MAX_REDRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeConfig {
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    #[serde(rename = "J")]
    pub count: usize,
    pub base_seed: u64,
    pub sigma1: f64,
    pub sigma2: f64,
}

impl SdeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param(
                "dt",
                format!("must be positive, got {}", self.dt),
            ));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::param(
                "T",
                format!("must be positive, got {}", self.t_end),
            ));
        }
        if self.count == 0 {
            return Err(Error::param("J", "need at least one trajectory"));
        }
        if !(self.sigma1 > 0.0 && self.sigma2 > 0.0) {
            return Err(Error::param("sigma", "noise strengths must be positive"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }
}

/// One pedestrian path sampled at `t0 + k dt`, `t0 = entry_step · dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: u64,
    pub entry_step: usize,
    pub dt: f64,
    pub t0: f64,
    pub tf: f64,
    pub exited: bool,
    #[serde(skip)]
    pub positions: Vec<Point>,
    pub stats: BoundaryStats,
}

impl Trajectory {
    pub fn entered(&self) -> bool {
        !self.positions.is_empty()
    }

    /// Time of sample `k`.
    pub fn time(&self, k: usize) -> f64 {
        (self.entry_step + k) as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.positions.len()).map(|k| self.time(k))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub density: String,
    pub sde: SdeConfig,
    pub v_max: f64,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub trajectories: Vec<Trajectory>,
    pub provenance: Provenance,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn entered(&self) -> impl Iterator<Item = &Trajectory> {
        self.trajectories.iter().filter(|t| t.entered())
    }

    /// First `n` trajectories, as if generated with `J = n`.
    pub fn truncated(&self, n: usize) -> Ensemble {
        let mut provenance = self.provenance.clone();
        provenance.sde.count = n.min(self.len());
        Ensemble {
            trajectories: self.trajectories[..provenance.sde.count].to_vec(),
            provenance,
        }
    }
}

/// Simulates walker `id` with its own RNG stream seeded by `base_seed + id`.
pub fn simulate_walker(
    id: u64,
    density: &dyn DensitySource,
    params: &ModelParams,
    cfg: &SdeConfig,
) -> Result<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.base_seed.wrapping_add(id));
    let domain = &params.potential.grid().domain;
    let h = domain.inflow_half_width();
    let y_entry = h * (2.0 * rng.random::<f64>() - 1.0);
    let dt = cfg.dt;
    let n_steps = cfg.steps();
    let mut stats = BoundaryStats::default();
    let mut positions = Vec::new();
    let mut entry_step = n_steps;
    let mut exited = false;
    let mut exit_step = n_steps;

    for k in 0..n_steps {
        let t = cfg.time(k);
        if positions.is_empty() {
            match attempt_entry(y_entry, t, density, params, dt, &mut rng, &mut stats)? {
                BoundaryOutcome::Inside(p) => {
                    positions.push(p);
                    entry_step = k;
                }
                _ => continue,
            }
        }
        let x = *positions.last().expect("walker is inside");
        let mut next = None;
        for _ in 0..MAX_REDRAWS {
            let xi: (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
            let proposal = em_step(x, t, density, params, dt, xi)?;
            match apply_boundary(x, proposal, t, density, params, dt, &mut rng, &mut stats)? {
                BoundaryOutcome::Rejected => stats.rejected_steps += 1,
                outcome => {
                    next = Some(outcome);
                    break;
                }
            }
        }
        match next {
            Some(BoundaryOutcome::Inside(p)) => positions.push(p),
            Some(BoundaryOutcome::Exited(p)) => {
                positions.push(p);
                exited = true;
                exit_step = k + 1;
                break;
            }
            _ => positions.push(x),
        }
    }

    let tf = if exited {
        cfg.time(exit_step)
    } else {
        cfg.t_end
    };
    Ok(Trajectory {
        id,
        entry_step,
        dt,
        t0: cfg.time(entry_step),
        tf,
        exited,
        positions,
        stats,
    })
}

/// `J` independent walkers, all waiting in front of the entrance at t = 0.
///
/// The noise strengths of `cfg` replace those of `params`. Results do not depend
/// on thread scheduling.
pub fn generate_ensemble(
    density: &dyn DensitySource,
    params: &ModelParams,
    cfg: &SdeConfig,
) -> Result<Ensemble> {
    cfg.validate()?;
    let p = params.with_sigma(cfg.sigma1, cfg.sigma2);
    let trajectories = (1..=cfg.count as u64)
        .into_par_iter()
        .map(|id| simulate_walker(id, density, &p, cfg))
        .collect::<Result<Vec<_>>>()?;
    let never = trajectories.iter().filter(|t| !t.entered()).count();
    if never > 0 {
        log::info!(
            "{never} of {} walkers never entered before T = {}",
            cfg.count,
            cfg.t_end
        );
    }
    Ok(Ensemble {
        trajectories,
        provenance: Provenance {
            density: density.describe(),
            sde: *cfg,
            v_max: params.v_max,
            a: params.a,
            b: params.b,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fp::FrozenDensity;
    use crate::geometry::{potential_for, DomainSpec};

    fn setup(a: f64) -> (ModelParams, FrozenDensity) {
        let d = DomainSpec::corridor(3.0, 0.25).unwrap();
        let pot = potential_for(d.clone(), 120, 10).unwrap();
        (
            ModelParams::new(1.5, a, 0.4, 0.05, 0.05, pot).unwrap(),
            FrozenDensity {
                domain: d,
                value: 0.3,
            },
        )
    }

    fn cfg(count: usize) -> SdeConfig {
        SdeConfig {
            dt: 1e-3,
            t_end: 0.5,
            count,
            base_seed: 7,
            sigma1: 0.05,
            sigma2: 0.05,
        }
    }

    #[test]
    fn no_inflow_means_nobody_enters() {
        let (p, dens) = setup(0.0);
        let ens = generate_ensemble(&dens, &p, &cfg(5)).unwrap();
        assert!(ens.trajectories.iter().all(|t| !t.entered() && t.tf == 0.5));
    }

    #[test]
    fn ids_contiguous_and_times_consistent() {
        let (p, dens) = setup(0.9);
        let ens = generate_ensemble(&dens, &p, &cfg(6)).unwrap();
        for (i, t) in ens.trajectories.iter().enumerate() {
            assert_eq!(t.id, i as u64 + 1);
            assert!(t.entered());
            assert!(t.t0 <= t.tf && t.tf <= 0.5);
            assert_eq!(t.positions[0].x, 0.0);
            let last = t.time(t.positions.len() - 1);
            assert!((last - t.tf).abs() < 1e-12);
        }
    }

    #[test]
    fn growing_the_ensemble_keeps_earlier_walkers() {
        let (p, dens) = setup(0.9);
        let small = generate_ensemble(&dens, &p, &cfg(4)).unwrap();
        let large = generate_ensemble(&dens, &p, &cfg(5)).unwrap();
        assert_eq!(small.trajectories[..], large.trajectories[..4]);
        assert_eq!(large.truncated(4).trajectories, small.trajectories);
    }
}
