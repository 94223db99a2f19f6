mod common;

use std::sync::Arc;

use common::{ks_two_sample, normal_cdf};
use corridor_core::fp::{
    solve_fp, solve_fp_with, DensitySource, ForwardOptions, FrozenDensity, ModelParams,
};
use corridor_core::geometry::{potential_for, DomainSpec, Point, Potential};
use corridor_core::inference::{
    nelder_mead, nelder_mead_fn, pcn_sample_fn, psi_ensemble, DensityMode, ForwardSigma,
    FrozenForward, InferenceConfig, Likelihood, Prior,
};
use corridor_core::trajectories::{
    generate_ensemble, BoundaryStats, Ensemble, Provenance, SdeConfig, Trajectory,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn corridor() -> Arc<Potential> {
    potential_for(DomainSpec::corridor(3.0, 0.25).unwrap(), 60, 8).unwrap()
}

fn inference(sigma1: f64, sigma2: f64) -> InferenceConfig {
    InferenceConfig {
        sigma1,
        sigma2,
        mode: DensityMode::Transient,
        pde_dt: 0.005,
        forward_sigma: ForwardSigma::Model,
    }
}

// random walk in the interior of the corridor, not produced by the crate's SDE code
fn synthetic(paths: usize, steps: usize, dt: f64, seed: u64) -> Ensemble {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trajectories = (0..paths)
        .map(|id| {
            let entry_step = rng.random_range(0..50);
            let mut p = Point::new(rng.random_range(0.1..1.0), rng.random_range(-0.2..0.2));
            let mut positions = vec![p];
            for _ in 0..steps {
                p = Point::new(
                    (p.x + rng.random_range(-0.01..0.03)).clamp(0.01, 2.99),
                    (p.y + rng.random_range(-0.02..0.02)).clamp(-0.24, 0.24),
                );
                positions.push(p);
            }
            Trajectory {
                id: id as u64,
                entry_step,
                dt,
                t0: entry_step as f64 * dt,
                tf: (entry_step + steps) as f64 * dt,
                exited: false,
                positions,
                stats: BoundaryStats::default(),
            }
        })
        .collect();
    let sde = SdeConfig {
        dt,
        t_end: 1.0,
        count: paths,
        base_seed: seed,
        sigma1: 0.05,
        sigma2: 0.05,
    };
    Ensemble {
        trajectories,
        provenance: Provenance {
            density: "synthetic".into(),
            sde,
            v_max: 1.0,
            a: 0.0,
            b: 0.0,
        },
    }
}

#[test]
fn tabulated_normal_cdf_matches_reference_values() {
    assert!((normal_cdf(0.0) - 0.5).abs() < 1e-12);
    assert!((normal_cdf(1.96) - 0.975_002_104_851_780).abs() < 1e-12);
    assert!((normal_cdf(-3.0) - 0.001_349_898_031_630_1).abs() < 1e-13);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn psi_matches_the_constant_density_closed_form(
        v in 0.1f64..3.0, rho in 0.0f64..0.95, s1 in 0.05f64..2.0, s2 in 0.05f64..2.0, seed in 0u64..1000,
    ) {
        let pot = corridor();
        let ens = synthetic(5, 40, 1e-3, seed);
        let d = FrozenDensity { domain: pot.grid().domain.clone(), value: rho };
        let got = psi_ensemble(v, &ens, &d, &pot, &inference(s1, s2)).unwrap();
        // F = v (1 - ρ) e1 everywhere, so only the x-increments enter
        let f = v * (1.0 - rho);
        let expected: f64 = ens
            .trajectories
            .iter()
            .map(|t| {
                let n = (t.positions.len() - 1) as f64;
                let dx1 = t.positions.last().unwrap().x - t.positions[0].x;
                (f * f * n * t.dt - 2.0 * f * dx1) / (4.0 * s1 * s1)
            })
            .sum();
        prop_assert!((got - expected).abs() <= 1e-10 * expected.abs().max(1.0), "{} vs {}", got, expected);
    }

    #[test]
    fn objective_is_convex_and_the_simplex_finds_its_vertex(
        rho in 0.0f64..0.8, m in 0.5f64..2.0, c in 0.05f64..1.0, seed in 0u64..1000,
    ) {
        let pot = corridor();
        let ens = Arc::new(synthetic(4, 60, 1e-3, seed));
        let d: Arc<dyn DensitySource> = Arc::new(FrozenDensity { domain: pot.grid().domain.clone(), value: rho });
        let lik = Likelihood::new(ens.clone(), Box::new(FrozenForward(d)), pot, inference(1.0, 1.0));
        let prior = Prior::new(m, c).unwrap();
        let j = |v: f64| lik.psi(v).unwrap() + prior.penalty(v);
        for v in [0.3, 0.8, 1.4, 2.2] {
            let h = 0.05;
            prop_assert!(j(v - h) + j(v + h) - 2.0 * j(v) > 0.0);
        }
        // Ψ = A v² − B v with A = (1-ρ)² Σn dt / 4, B = (1-ρ) ΣΔX1 / 2
        let (mut time, mut dx1) = (0.0, 0.0);
        for t in &ens.trajectories {
            time += (t.positions.len() - 1) as f64 * t.dt;
            dx1 += t.positions.last().unwrap().x - t.positions[0].x;
        }
        let g = 1.0 - rho;
        let vertex = (g * dx1 / 2.0 + m / c) / (g * g * time / 2.0 + 1.0 / c);
        prop_assume!(vertex > 0.05);
        let map = nelder_mead(&lik, &prior, 1.0, 1e-10).unwrap();
        prop_assert!(map.converged);
        prop_assert!((map.v_hat - vertex).abs() < 1e-5, "{} vs {}", map.v_hat, vertex);
    }
}

#[test]
fn simplex_minimizes_arbitrary_smooth_functions() {
    for (target, scale) in [(0.7, 1.0), (2.5, 30.0), (1.01, 0.01)] {
        let r = nelder_mead_fn(
            |v: f64| Ok(scale * (v - target).powi(2) + (v - target).powi(4)),
            1.0,
            1e-12,
        )
        .unwrap();
        assert!((r.v_hat - target).abs() < 1e-5, "{} vs {target}", r.v_hat);
    }
}

/// Draws from N(m, c) restricted to v > 0, tilted by exp(-Ψ), by rejection.
fn rejection_sample(n: usize, prior: Prior, psi: impl Fn(f64) -> f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let z: f64 = rng.sample(StandardNormal);
        let v = prior.m + prior.c.sqrt() * z;
        if v > 0.0 && rng.random::<f64>() < (-psi(v)).exp() {
            out.push(v);
        }
    }
    out
}

#[test]
fn pcn_samples_match_an_independent_rejection_sampler() {
    let prior = Prior::new(1.0, 0.25).unwrap();
    let cases: [(&str, fn(f64) -> f64); 2] = [
        ("gaussian tilt", |v| (v - 1.4).powi(2) / (2.0 * 0.04)),
        ("skewed tilt", |v| {
            2.0 * (v - 0.8).max(0.0).powi(3) + 0.5 * v
        }),
    ];
    for (name, psi) in cases {
        let n = 10_000;
        let thin = 30;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let chain =
            pcn_sample_fn(&|v| Ok(psi(v)), &prior, 0.5, n * thin + 2000, 1.0, &mut rng).unwrap();
        let draws: Vec<f64> = chain.samples[2000..]
            .iter()
            .step_by(thin)
            .copied()
            .take(n)
            .collect();
        let reference = rejection_sample(n, prior, psi, 99);
        let (d, p) = ks_two_sample(&draws, &reference);
        assert!(p > 0.01, "{name}: KS distance {d:.4}, p = {p:.4}");
    }
}

#[test]
fn psi_does_not_depend_on_the_density_unit() {
    let pot = potential_for(DomainSpec::corridor(3.0, 0.25).unwrap(), 120, 10).unwrap();
    let p = ModelParams::new(1.5, 0.2, 0.4, 0.05, 0.05, pot.clone()).unwrap();
    let scaled = solve_fp(&p, 1.0, 0.005).unwrap();
    let sde = SdeConfig {
        dt: 1e-3,
        t_end: 1.0,
        count: 10,
        base_seed: 4,
        sigma1: 0.05,
        sigma2: 0.05,
    };
    let ens = generate_ensemble(&scaled, &p, &sde).unwrap();
    let inf = inference(1.0, 1.0);
    let reference = psi_ensemble(1.3, &ens, &scaled, &pot, &inf).unwrap();
    for rho_star in [2.0, 5.0, 0.3] {
        let opts = ForwardOptions {
            rho_max: rho_star,
            auto_substep: false,
        };
        let unscaled = solve_fp_with(&p, None, 1.0, 0.005, opts).unwrap();
        let got = psi_ensemble(1.3, &ens, &unscaled, &pot, &inf).unwrap();
        if rho_star == 2.0 {
            assert_eq!(got.to_bits(), reference.to_bits());
        } else {
            assert!(
                (got - reference).abs() <= 1e-12 * reference.abs(),
                "rho* = {rho_star}: {got} vs {reference}"
            );
        }
    }
}
