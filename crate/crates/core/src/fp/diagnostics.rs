use log::warn;

use super::density::DensityField;
use super::params::ModelParams;

/// Entropy Σ area·[ρ ln ρ + (1-ρ) ln(1-ρ) + (v_max/σ1²) ρ φ] with 0 ln 0 = 0.
///
/// For a closed system this is a Lyapunov functional whenever the drift is
/// e1 (the straight corridor, φ = L - x1) or Σ is isotropic. With v_max = σ1 = 1
/// it is the classical ∫ h(ρ) - ρ x1 shifted by L times the mass.
pub fn entropy(field: &DensityField, params: &ModelParams) -> f64 {
    let g = &*field.grid;
    let phi = params.potential.phi();
    let weight = params.v_max / (params.sigma1 * params.sigma1);
    let xlogx = |r: f64| if r > 0.0 { r * r.ln() } else { 0.0 };
    let area = g.cell_area();
    (0..g.len())
        .filter(|&k| g.is_inside(k))
        .map(|k| {
            let r = field.rho[k].clamp(0.0, 1.0);
            area * (xlogx(r) + xlogx(1.0 - r) + weight * r * phi[k])
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Regime {
    InfluxLimited,
    OutfluxLimited,
    MaximalCurrent,
}

/// Stationary phase selected by the boundary rates.
pub fn classify_regime(params: &ModelParams) -> Regime {
    let half = 0.5 * params.v_max;
    let (a, b) = (params.a, params.b);
    if a >= half && b >= half {
        Regime::MaximalCurrent
    } else if a > b {
        Regime::OutfluxLimited
    } else {
        if a == b {
            warn!("a = b = {a} below v_max/2: phase boundary, reporting influx limited");
        }
        Regime::InfluxLimited
    }
}
