//! Girsanov log-likelihood Ψ and the forward models that feed it.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fp::{
    solve_fp_with, steady_state_1d, DensitySource, ForwardOptions, ModelParams,
    DEFAULT_STEADY_NODES,
};
use crate::geometry::Potential;
use crate::trajectories::{Ensemble, Trajectory};

/// Which density the likelihood uses for a candidate speed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityMode {
    Transient,
    Steady,
}

/// Which noise strengths the forward PDE uses during estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForwardSigma {
    /// The model's own σ (the one the data were generated with).
    Model,
    /// The inference σ, used for both the PDE and the likelihood weight.
    Inference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    /// Diagonal of Σ_inf = diag(σ1², σ2²) weighting the likelihood.
    pub sigma1: f64,
    pub sigma2: f64,
    pub mode: DensityMode,
    /// Time step of forward solves during estimation.
    pub pde_dt: f64,
    pub forward_sigma: ForwardSigma,
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma1 > 0.0 && self.sigma2 > 0.0) {
            return Err(Error::param("inference.sigma", "must be positive"));
        }
        if !(self.pde_dt > 0.0) {
            return Err(Error::param("inference.pde_dt", "must be positive"));
        }
        Ok(())
    }
}

/// Density as a function of the candidate free speed.
pub trait ForwardModel: Send + Sync {
    fn density(&self, v: f64) -> Result<Arc<dyn DensitySource>>;

    fn describe(&self) -> String;
}

/// Full transient solve from the empty corridor for every candidate.
pub struct TransientForward {
    pub params: ModelParams,
    pub t_end: f64,
    pub dt: f64,
    pub rho_max: f64,
}

impl ForwardModel for TransientForward {
    fn density(&self, v: f64) -> Result<Arc<dyn DensitySource>> {
        let opts = ForwardOptions {
            rho_max: self.rho_max,
            auto_substep: true,
        };
        let h = solve_fp_with(&self.params.with_v_max(v), None, self.t_end, self.dt, opts)?;
        Ok(Arc::new(h))
    }

    fn describe(&self) -> String {
        format!(
            "transient forward solve, T = {}, dt = {}",
            self.t_end, self.dt
        )
    }
}

/// 1D stationary profile for every candidate.
pub struct SteadyForward {
    pub params: ModelParams,
    pub nodes: usize,
}

impl SteadyForward {
    pub fn new(params: ModelParams) -> Self {
        Self {
            params,
            nodes: DEFAULT_STEADY_NODES,
        }
    }
}

impl ForwardModel for SteadyForward {
    fn density(&self, v: f64) -> Result<Arc<dyn DensitySource>> {
        Ok(Arc::new(steady_state_1d(
            &self.params.with_v_max(v),
            self.nodes,
        )?))
    }

    fn describe(&self) -> String {
        format!("steady 1D forward solve, {} nodes", self.nodes)
    }
}

/// A density that does not react to the candidate speed.
pub struct FrozenForward(pub Arc<dyn DensitySource>);

impl ForwardModel for FrozenForward {
    fn density(&self, _v: f64) -> Result<Arc<dyn DensitySource>> {
        Ok(self.0.clone())
    }

    fn describe(&self) -> String {
        format!("frozen: {}", self.0.describe())
    }
}

/// Itô (left-endpoint) discretization of
/// ψ = ¼ Σ_k [ F_kᵀ Σ⁻¹ F_k dt − 2 F_kᵀ Σ⁻¹ (X_{k+1} − X_k) ].
pub fn psi_single(
    v: f64,
    traj: &Trajectory,
    density: &dyn DensitySource,
    potential: &Potential,
    cfg: &InferenceConfig,
) -> Result<f64> {
    let xs = &traj.positions;
    if xs.len() < 2 {
        return Ok(0.0);
    }
    let (w1, w2) = (
        1.0 / (cfg.sigma1 * cfg.sigma1),
        1.0 / (cfg.sigma2 * cfg.sigma2),
    );
    let rho_max = density.rho_max();
    let dt = traj.dt;
    let mut sum = 0.0;
    for k in 0..xs.len() - 1 {
        let x = xs[k];
        let rho = density.density_at(x, traj.time(k))?;
        let speed = v * (1.0 - (rho / rho_max).clamp(0.0, 1.0));
        let d = potential.drift_direction_at(x)?;
        let (f1, f2) = (speed * d.x, speed * d.y);
        let (dx1, dx2) = (xs[k + 1].x - x.x, xs[k + 1].y - x.y);
        sum += (f1 * f1 * w1 + f2 * f2 * w2) * dt - 2.0 * (f1 * dx1 * w1 + f2 * dx2 * w2);
    }
    Ok(0.25 * sum)
}

/// Sum of ψ_j over the ensemble, in trajectory order.
pub fn psi_ensemble(
    v: f64,
    ens: &Ensemble,
    density: &dyn DensitySource,
    potential: &Potential,
    cfg: &InferenceConfig,
) -> Result<f64> {
    let terms = ens
        .trajectories
        .par_iter()
        .map(|t| psi_single(v, t, density, potential, cfg))
        .collect::<Result<Vec<f64>>>()?;
    Ok(terms.iter().sum())
}

/// Ψ_J as a function of v alone: forward model, data and likelihood weights.
///
/// Values are memoized on v rounded to 1e-10.
pub struct Likelihood {
    ensemble: Arc<Ensemble>,
    forward: Box<dyn ForwardModel>,
    potential: Arc<Potential>,
    cfg: InferenceConfig,
    cache: Mutex<HashMap<i64, f64>>,
}

impl Likelihood {
    pub fn new(
        ensemble: Arc<Ensemble>,
        forward: Box<dyn ForwardModel>,
        potential: Arc<Potential>,
        cfg: InferenceConfig,
    ) -> Self {
        Self {
            ensemble,
            forward,
            potential,
            cfg,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    pub fn config(&self) -> &InferenceConfig {
        &self.cfg
    }

    pub fn describe(&self) -> String {
        self.forward.describe()
    }

    /// Number of distinct v evaluated so far.
    pub fn evaluations(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }

    pub fn psi(&self, v: f64) -> Result<f64> {
        if v == 0.0 || self.ensemble.entered().all(|t| t.positions.len() < 2) {
            return Ok(0.0);
        }
        let key = (v * 1e10).round() as i64;
        if let Some(&val) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(val);
        }
        let value = self
            .forward
            .density(v)
            .and_then(|d| psi_ensemble(v, &self.ensemble, d.as_ref(), &self.potential, &self.cfg))
            .map_err(|e| Error::ForwardSolve {
                v,
                source: Box::new(e),
            })?;
        self.cache.lock().expect("cache lock").insert(key, value);
        Ok(value)
    }
}
