//! Stationary 1D profile along the corridor by damped Newton.
//!
//! Nodes `x_i = i h` on [0, L]; the flux `j = -σ1² ρ' + v ρ(1-ρ)` is evaluated on
//! the midpoints with centered differences and averaged convection. The end
//! nodes carry half control volumes closed by the Robin fluxes.

use super::density::SteadyProfile;
use super::params::ModelParams;
use crate::error::{Error, Result};

const MAX_ITER: usize = 200;
const MAX_HALVINGS: usize = 50;
const TOL: f64 = 1e-10;

/// Default node count: resolves the exit and entrance layers for σ1 down to 0.05.
pub const DEFAULT_STEADY_NODES: usize = 6001;

struct Problem {
    n: usize,
    h: f64,
    s2: f64,
    v: f64,
    a: f64,
    b: f64,
}

impl Problem {
    #[inline]
    fn g(&self, r: f64) -> f64 {
        self.v * r * (1.0 - r)
    }

    #[inline]
    fn dg(&self, r: f64) -> f64 {
        self.v * (1.0 - 2.0 * r)
    }

    #[inline]
    fn flux(&self, rho: &[f64], i: usize) -> f64 {
        -self.s2 * (rho[i + 1] - rho[i]) / self.h + 0.5 * (self.g(rho[i]) + self.g(rho[i + 1]))
    }

    fn residual(&self, rho: &[f64], out: &mut [f64]) {
        let n = self.n;
        let mut prev = self.flux(rho, 0);
        out[0] = prev - self.a * (1.0 - rho[0]);
        for i in 1..n - 1 {
            let next = self.flux(rho, i);
            out[i] = next - prev;
            prev = next;
        }
        out[n - 1] = self.b * rho[n - 1] - prev;
    }

    /// Tridiagonal Jacobian as (sub, diag, sup).
    fn jacobian(&self, rho: &[f64], lo: &mut [f64], di: &mut [f64], up: &mut [f64]) {
        let n = self.n;
        let d = self.s2 / self.h;
        // ∂j_{i+½}/∂ρ_i and ∂j_{i+½}/∂ρ_{i+1}
        let jl = |i: usize| d + 0.5 * self.dg(rho[i]);
        let jr = |i: usize| -d + 0.5 * self.dg(rho[i + 1]);
        di[0] = jl(0) + self.a;
        up[0] = jr(0);
        for i in 1..n - 1 {
            lo[i] = -jl(i - 1);
            di[i] = jl(i) - jr(i - 1);
            up[i] = jr(i);
        }
        lo[n - 1] = -jl(n - 2);
        di[n - 1] = self.b - jr(n - 2);
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| f64::max(m, x.abs()))
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Thomas algorithm; `rhs` is overwritten with the solution.
fn solve_tridiagonal(lo: &[f64], di: &[f64], up: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = di.len();
    let mut c = vec![0.0; n];
    let mut denom = di[0];
    if denom == 0.0 {
        return Err(Error::LinearSolve {
            residual: f64::INFINITY,
        });
    }
    c[0] = up[0] / denom;
    rhs[0] /= denom;
    for i in 1..n {
        denom = di[i] - lo[i] * c[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::LinearSolve {
                residual: f64::INFINITY,
            });
        }
        if i + 1 < n {
            c[i] = up[i] / denom;
        }
        rhs[i] = (rhs[i] - lo[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}

pub fn steady_state_1d(params: &ModelParams, nx: usize) -> Result<SteadyProfile> {
    params.validate()?;
    let domain = params.potential.grid().domain.clone();
    if !domain.is_straight() {
        return Err(Error::InvalidDomain(
            "steady 1D profiles need a straight corridor with a full-width exit".into(),
        ));
    }
    if nx < 3 {
        return Err(Error::InvalidGrid(format!(
            "need at least 3 nodes, got {nx}"
        )));
    }
    if params.a + params.b == 0.0 {
        return Err(Error::param("a", "a and b must not both vanish"));
    }
    let p = Problem {
        n: nx,
        h: domain.length / (nx - 1) as f64,
        s2: params.sigma1 * params.sigma1,
        v: params.v_max,
        a: params.a,
        b: params.b,
    };

    let mut rho = vec![params.a / (params.a + params.b); nx];
    let mut res = vec![0.0; nx];
    let (mut lo, mut di, mut up) = (vec![0.0; nx], vec![0.0; nx], vec![0.0; nx]);
    let mut trial = vec![0.0; nx];
    let mut trial_res = vec![0.0; nx];
    p.residual(&rho, &mut res);

    for iter in 0..=MAX_ITER {
        let r_sup = sup(&res);
        if r_sup < TOL {
            return Ok(SteadyProfile {
                domain,
                rho,
                residual: r_sup,
                iterations: iter,
            });
        }
        if iter == MAX_ITER {
            break;
        }
        p.jacobian(&rho, &mut lo, &mut di, &mut up);
        let mut delta: Vec<f64> = res.iter().map(|r| -r).collect();
        solve_tridiagonal(&lo, &di, &up, &mut delta)?;

        let norm = l2(&res);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            for i in 0..nx {
                trial[i] = rho[i] + lambda * delta[i];
            }
            p.residual(&trial, &mut trial_res);
            if l2(&trial_res) < norm {
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonStagnation {
                iterations: iter,
                residual: r_sup,
            });
        }
        std::mem::swap(&mut rho, &mut trial);
        std::mem::swap(&mut res, &mut trial_res);
    }
    Err(Error::NewtonStagnation {
        iterations: MAX_ITER,
        residual: sup(&res),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{potential_for, DomainSpec};

    fn params(v: f64, a: f64, b: f64, sigma: f64) -> ModelParams {
        let pot = potential_for(DomainSpec::corridor(3.0, 0.25).unwrap(), 12, 4).unwrap();
        ModelParams::new(v, a, b, sigma, sigma, pot).unwrap()
    }

    #[test]
    fn thomas_matches_hand_solution() {
        // [2 -1 0; -1 2 -1; 0 -1 2] x = [1, 0, 1] -> x = [1, 1, 1]
        let mut rhs = vec![1.0, 0.0, 1.0];
        solve_tridiagonal(
            &[0.0, -1.0, -1.0],
            &[2.0, 2.0, 2.0],
            &[-1.0, -1.0, 0.0],
            &mut rhs,
        )
        .unwrap();
        for x in rhs {
            assert!((x - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn maximal_current_half_profile() {
        let prof = steady_state_1d(&params(1.5, 0.75, 0.75, 0.05), 201).unwrap();
        assert_eq!(prof.iterations(), 0);
        assert!(prof.values().iter().all(|&r| r == 0.5));
    }

    #[test]
    fn influx_plateau_below_half() {
        let prof = steady_state_1d(&params(1.5, 0.2, 0.4, 0.05), DEFAULT_STEADY_NODES).unwrap();
        assert!(prof.residual() < 1e-10);
        let mid = prof.at_x(1.5);
        assert!((mid - 0.2 / 1.5).abs() < 1e-3, "plateau {mid}");
        assert!(prof.values().last().unwrap() > &mid);
    }

    #[test]
    fn outflux_plateau_above_half() {
        let prof = steady_state_1d(&params(1.5, 0.4, 0.2, 0.05), DEFAULT_STEADY_NODES).unwrap();
        let mid = prof.at_x(1.5);
        assert!((mid - (1.0 - 0.2 / 1.5)).abs() < 1e-3, "plateau {mid}");
        assert!(prof.values()[0] < mid);
        assert!(prof.values().iter().all(|&r| (0.0..=1.0).contains(&r)));
    }

    #[test]
    fn bottleneck_rejected() {
        use crate::geometry::Bottleneck;
        let d = DomainSpec::corridor(3.0, 0.25)
            .unwrap()
            .with_bottleneck(Bottleneck {
                half_width: 0.05,
                x_start: 1.2,
                x_end: 1.8,
            })
            .unwrap();
        let pot = potential_for(d, 120, 20).unwrap();
        let p = ModelParams::new(1.5, 0.2, 0.4, 0.05, 0.05, pot).unwrap();
        assert!(steady_state_1d(&p, 101).is_err());
    }
}
