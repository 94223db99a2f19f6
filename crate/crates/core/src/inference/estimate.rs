//! MAP estimation by 1D Nelder–Mead and posterior sampling by pCN.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::likelihood::Likelihood;
use crate::error::{Error, Result};

const PENALTY_EPS: f64 = 1e-6;
const PENALTY_SLOPE: f64 = 1e6;
const MAX_NM_ITER: usize = 500;

/// Gaussian prior N(m, c) restricted to v > 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    pub m: f64,
    pub c: f64,
}

impl Prior {
    pub fn new(m: f64, c: f64) -> Result<Self> {
        let p = Self { m, c };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::param(
                "prior.c",
                format!("must be positive, got {}", self.c),
            ));
        }
        if !self.m.is_finite() {
            return Err(Error::param("prior.m", "must be finite"));
        }
        Ok(())
    }

    pub fn penalty(&self, v: f64) -> f64 {
        (v - self.m).powi(2) / (2.0 * self.c)
    }
}

/// 𝒥(v) = Ψ_J(v) + (v − m)²/(2c), extended linearly with a steep slope for v ≤ 0.
pub fn objective(v: f64, lik: &Likelihood, prior: &Prior) -> Result<f64> {
    if v > 0.0 {
        Ok(lik.psi(v)? + prior.penalty(v))
    } else {
        let at_eps = lik.psi(PENALTY_EPS)? + prior.penalty(PENALTY_EPS);
        Ok(at_eps + PENALTY_SLOPE * (PENALTY_EPS - v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub v: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapResult {
    pub v_hat: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best vertex after each iteration.
    pub trace: Vec<TraceEntry>,
}

/// Minimizes a scalar function with a two-vertex Nelder–Mead simplex
/// {v_init, 1.05 v_init}; reflection 1, expansion 2, contraction 1/2, shrink 1/2.
pub fn nelder_mead_fn<F>(mut f: F, v_init: f64, tol: f64) -> Result<MapResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(v_init > 0.0) {
        return Err(Error::param(
            "v_init",
            format!("must be positive, got {v_init}"),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::param("tol", format!("must be positive, got {tol}")));
    }
    let mut s = [(v_init, f(v_init)?), (1.05 * v_init, f(1.05 * v_init)?)];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..MAX_NM_ITER {
        if s[1].1 < s[0].1 {
            s.swap(0, 1);
        }
        trace.push(TraceEntry {
            iter,
            v: s[0].0,
            objective: s[0].1,
        });
        if (s[1].0 - s[0].0).abs() < tol {
            converged = true;
            break;
        }
        iterations = iter + 1;
        let (best, worst) = (s[0], s[1]);
        // with two vertices the centroid of all but the worst is the best vertex
        let c = best.0;
        let xr = c + (c - worst.0);
        let fr = f(xr)?;
        if fr < best.1 {
            let xe = c + 2.0 * (c - worst.0);
            let fe = f(xe)?;
            s[1] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < worst.1 {
            let xc = c + 0.5 * (xr - c);
            let fc = f(xc)?;
            if fc <= fr {
                s[1] = (xc, fc);
                continue;
            }
        } else {
            let xc = c + 0.5 * (worst.0 - c);
            let fc = f(xc)?;
            if fc < worst.1 {
                s[1] = (xc, fc);
                continue;
            }
        }
        let xs = best.0 + 0.5 * (worst.0 - best.0);
        s[1] = (xs, f(xs)?);
    }
    if s[1].1 < s[0].1 {
        s.swap(0, 1);
    }
    if !converged {
        log::warn!(
            "Nelder-Mead stopped after {MAX_NM_ITER} iterations without reaching tol = {tol}"
        );
        iterations = MAX_NM_ITER;
    }
    Ok(MapResult {
        v_hat: s[0].0,
        objective: s[0].1,
        iterations,
        converged,
        trace,
    })
}

/// MAP estimate of v_max.
pub fn nelder_mead(lik: &Likelihood, prior: &Prior, v_init: f64, tol: f64) -> Result<MapResult> {
    nelder_mead_fn(|v| objective(v, lik, prior), v_init, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorChain {
    /// v^(0), ..., v^(N).
    pub samples: Vec<f64>,
    /// `accepted[k]` tells whether step k (1-based) moved; entry 0 is the initial state.
    pub accepted: Vec<bool>,
    pub beta: f64,
    pub burn_in: usize,
    /// Proposals rejected because the forward solve failed.
    pub forward_failures: usize,
}

impl PosteriorChain {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Default post-processing cut: the first 20% of the chain.
pub fn default_burn_in(n: usize) -> usize {
    (n + 1) / 5
}

/// Preconditioned Crank–Nicolson sampler for the posterior of v_max.
///
/// Proposal y = m + √(1−β²)(v − m) + β ξ, ξ ~ N(0, c); accepted with
/// min{1, exp(Ψ(v) − Ψ(y))} if y > 0. A failing forward solve counts as rejection.
pub fn pcn_sample<R: Rng + ?Sized>(
    lik: &Likelihood,
    prior: &Prior,
    beta: f64,
    n: usize,
    v_init: f64,
    rng: &mut R,
) -> Result<PosteriorChain> {
    pcn_sample_fn(&|v| lik.psi(v), prior, beta, n, v_init, rng)
}

/// [`pcn_sample`] for an arbitrary log-likelihood Ψ.
pub fn pcn_sample_fn<R: Rng + ?Sized>(
    psi: &dyn Fn(f64) -> Result<f64>,
    prior: &Prior,
    beta: f64,
    n: usize,
    v_init: f64,
    rng: &mut R,
) -> Result<PosteriorChain> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::param(
            "beta",
            format!("must lie in (0, 1], got {beta}"),
        ));
    }
    if n == 0 {
        return Err(Error::param("N", "chain needs at least one step"));
    }
    if !(v_init > 0.0) {
        return Err(Error::param(
            "v_init",
            format!("must be positive, got {v_init}"),
        ));
    }
    let shrink = (1.0 - beta * beta).sqrt();
    let sd = prior.c.sqrt();
    let mut v = v_init;
    let mut psi_v = psi(v)?;
    let mut samples = Vec::with_capacity(n + 1);
    let mut accepted = Vec::with_capacity(n + 1);
    samples.push(v);
    accepted.push(true);
    let mut forward_failures = 0;

    for _ in 0..n {
        let xi: f64 = rng.sample(StandardNormal);
        let y = prior.m + shrink * (v - prior.m) + beta * sd * xi;
        let u: f64 = rng.random();
        let mut moved = false;
        if y > 0.0 {
            match psi(y) {
                Ok(psi_y) => {
                    let alpha = (psi_v - psi_y).exp().min(1.0);
                    if u < alpha {
                        v = y;
                        psi_v = psi_y;
                        moved = true;
                    }
                }
                Err(e) => {
                    forward_failures += 1;
                    log::warn!("rejecting proposal {y}: {e}");
                }
            }
        }
        samples.push(v);
        accepted.push(moved);
    }
    Ok(PosteriorChain {
        samples,
        accepted,
        beta,
        burn_in: default_burn_in(n),
        forward_failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mean: f64,
    pub variance: f64,
    pub std_dev: f64,
    /// Monte Carlo standard error of the mean from batch means.
    pub mcse: f64,
    pub acceptance_rate: f64,
    pub samples: usize,
    pub histogram: Histogram,
}

/// Statistics over the samples after `chain.burn_in`.
pub fn posterior_summary(chain: &PosteriorChain, bins: usize) -> Result<PosteriorSummary> {
    if chain.samples.len() <= chain.burn_in {
        return Err(Error::param(
            "burn_in",
            "chain is not longer than the burn-in",
        ));
    }
    let xs = &chain.samples[chain.burn_in..];
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let variance = if n > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };

    let batches = (n as f64).sqrt().floor().max(1.0) as usize;
    let size = n / batches;
    let mcse = if batches > 1 && size > 0 {
        let means: Vec<f64> = (0..batches)
            .map(|b| xs[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
            .collect();
        let mm = means.iter().sum::<f64>() / batches as f64;
        let var = means.iter().map(|x| (x - mm).powi(2)).sum::<f64>() / (batches - 1) as f64;
        (var / batches as f64).sqrt()
    } else {
        0.0
    };

    let moves = &chain.accepted[chain.burn_in.max(1)..];
    let acceptance_rate = if moves.is_empty() {
        0.0
    } else {
        moves.iter().filter(|&&a| a).count() as f64 / moves.len() as f64
    };

    let bins = bins.max(1);
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut counts = vec![0; bins];
    let width = (hi - lo) / bins as f64;
    for &x in xs {
        let b = if width > 0.0 {
            (((x - lo) / width) as usize).min(bins - 1)
        } else {
            0
        };
        counts[b] += 1;
    }

    Ok(PosteriorSummary {
        mean,
        variance,
        std_dev: variance.sqrt(),
        mcse,
        acceptance_rate,
        samples: n,
        histogram: Histogram { lo, hi, counts },
    })
}
