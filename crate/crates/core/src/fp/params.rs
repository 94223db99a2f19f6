use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::Potential;

/// Full parameterization of the forward model in scaled density units.
#[derive(Debug, Clone)]
pub struct ModelParams {
    /// Free walking speed, m/s.
    pub v_max: f64,
    /// Inflow rate, m/s.
    pub a: f64,
    /// Outflow rate, m/s.
    pub b: f64,
    /// Diffusion strengths along and across the corridor, m/√s; Σ = diag(σ1², σ2²).
    pub sigma1: f64,
    pub sigma2: f64,
    pub potential: Arc<Potential>,
}

impl ModelParams {
    /// Checks positivity of all rates. The well-posedness bound `a, b <= v_max`
    /// is checked separately by [`validate_well_posed`](Self::validate_well_posed)
    /// because candidate speeds in the inverse problem may fall below `a` or `b`.
    pub fn new(
        v_max: f64,
        a: f64,
        b: f64,
        sigma1: f64,
        sigma2: f64,
        potential: Arc<Potential>,
    ) -> Result<Self> {
        let p = Self {
            v_max,
            a,
            b,
            sigma1,
            sigma2,
            potential,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_max > 0.0 && self.v_max.is_finite()) {
            return Err(Error::param(
                "v_max",
                format!("must be positive, got {}", self.v_max),
            ));
        }
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return Err(Error::param(
                "a",
                format!("must be non-negative, got {}", self.a),
            ));
        }
        if !(self.b >= 0.0 && self.b.is_finite()) {
            return Err(Error::param(
                "b",
                format!("must be non-negative, got {}", self.b),
            ));
        }
        if !(self.sigma1 > 0.0 && self.sigma2 > 0.0) {
            return Err(Error::param(
                "sigma",
                format!("must be positive, got ({}, {})", self.sigma1, self.sigma2),
            ));
        }
        Ok(())
    }

    pub fn validate_well_posed(&self) -> Result<()> {
        self.validate()?;
        if self.a > self.v_max {
            return Err(Error::param(
                "a",
                format!("must not exceed v_max = {}, got {}", self.v_max, self.a),
            ));
        }
        if self.b > self.v_max {
            return Err(Error::param(
                "b",
                format!("must not exceed v_max = {}, got {}", self.v_max, self.b),
            ));
        }
        Ok(())
    }

    pub fn with_v_max(&self, v_max: f64) -> Self {
        Self {
            v_max,
            ..self.clone()
        }
    }

    pub fn with_sigma(&self, sigma1: f64, sigma2: f64) -> Self {
        Self {
            sigma1,
            sigma2,
            ..self.clone()
        }
    }
}

/// Scaled fundamental diagram `v_max (1 - ρ)`, with ρ clamped to [0, 1].
pub fn velocity(params: &ModelParams, rho: f64) -> f64 {
    params.v_max * (1.0 - rho.clamp(0.0, 1.0))
}

/// Fundamental diagram in unscaled units, `v_max (1 - ρ/ρ_max)`.
pub fn velocity_unscaled(v_max: f64, rho: f64, rho_max: f64) -> f64 {
    v_max * (1.0 - (rho / rho_max).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{potential_for, DomainSpec};

    fn params(v: f64, a: f64, b: f64) -> Result<ModelParams> {
        let pot = potential_for(DomainSpec::corridor(3.0, 0.25).unwrap(), 12, 4).unwrap();
        ModelParams::new(v, a, b, 0.05, 0.05, pot)
    }

    #[test]
    fn fundamental_diagram_values() {
        let p = params(1.5, 0.2, 0.4).unwrap();
        assert_eq!(velocity(&p, 0.0), 1.5);
        assert_eq!(velocity(&p, 1.0), 0.0);
        assert_eq!(velocity(&p, 0.5), 0.75);
        assert_eq!(velocity(&p, -0.3), 1.5);
        assert_eq!(velocity(&p, 1.7), 0.0);
    }

    #[test]
    fn parameter_validation() {
        assert!(params(0.0, 0.1, 0.1).is_err());
        assert!(params(1.5, -0.1, 0.1).is_err());
        let p = params(1.5, 2.0, 0.1).unwrap();
        assert!(p.validate_well_posed().is_err());
        assert!(params(1.5, 0.9, 0.975)
            .unwrap()
            .validate_well_posed()
            .is_ok());
    }
}
