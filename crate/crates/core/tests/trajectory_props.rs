mod common;

use std::sync::Arc;

use common::mean_var;
use corridor_core::fp::{
    solve_fp, solve_fp_with, DensityHistory, ForwardOptions, FrozenDensity, ModelParams,
};
use corridor_core::geometry::{potential_for, Bottleneck, DomainSpec, Point};
use corridor_core::inference::{psi_ensemble, DensityMode, ForwardSigma, InferenceConfig};
use corridor_core::trajectories::{
    apply_boundary, em_step, generate_ensemble, BoundaryOutcome, BoundaryStats, Ensemble, SdeConfig,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn sde(count: usize, seed: u64, t_end: f64) -> SdeConfig {
    SdeConfig {
        dt: 1e-3,
        t_end,
        count,
        base_seed: seed,
        sigma1: 0.05,
        sigma2: 0.05,
    }
}

fn straight_params(a: f64, b: f64) -> ModelParams {
    let pot = potential_for(DomainSpec::corridor(3.0, 0.25).unwrap(), 120, 10).unwrap();
    ModelParams::new(1.5, a, b, 0.05, 0.05, pot).unwrap()
}

fn contained(ens: &Ensemble, domain: &DomainSpec) -> bool {
    ens.trajectories
        .iter()
        .flat_map(|t| &t.positions)
        .all(|&p| {
            p.x >= 0.0 && p.x <= domain.length && p.y.abs() <= domain.half_width_at(p.x) + 1e-12
        })
}

fn bit_equal(x: &Ensemble, y: &Ensemble) -> bool {
    x.trajectories.len() == y.trajectories.len()
        && x.trajectories.iter().zip(&y.trajectories).all(|(s, t)| {
            s.entry_step == t.entry_step
                && s.exited == t.exited
                && s.positions.len() == t.positions.len()
                && s.positions
                    .iter()
                    .zip(&t.positions)
                    .all(|(p, q)| p.x.to_bits() == q.x.to_bits() && p.y.to_bits() == q.y.to_bits())
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn straight_corridor_paths_stay_inside(seed in 0u64..10_000, value in 0.0f64..0.9, a in 0.2f64..1.2, b in 0.1f64..1.5) {
        let p = straight_params(a, b);
        let d = FrozenDensity { domain: p.potential.grid().domain.clone(), value };
        let ens = generate_ensemble(&d, &p, &sde(6, seed, 1.5)).unwrap();
        prop_assert!(contained(&ens, &p.potential.grid().domain));
    }

    #[test]
    fn bottleneck_paths_stay_inside(seed in 0u64..10_000, value in 0.0f64..0.6) {
        let domain = DomainSpec::corridor(3.0, 0.25)
            .unwrap()
            .with_bottleneck(Bottleneck { half_width: 0.05, x_start: 1.2, x_end: 1.8 })
            .unwrap()
            .with_exit_door(0.15)
            .unwrap();
        let pot = potential_for(domain.clone(), 120, 20).unwrap();
        let p = ModelParams::new(1.5, 0.6, 0.6, 0.05, 0.03, pot).unwrap();
        let d = FrozenDensity { domain: domain.clone(), value };
        let mut cfg = sde(6, seed, 2.5);
        cfg.sigma2 = 0.03;
        let ens = generate_ensemble(&d, &p, &cfg).unwrap();
        prop_assert!(contained(&ens, &domain));
        let exits_through_door = ens.trajectories.iter().filter(|t| t.exited).all(|t| {
            let last = t.positions.last().unwrap();
            last.x == 3.0 && last.y.abs() <= 0.15
        });
        prop_assert!(exits_through_door);
    }

    #[test]
    fn same_seed_same_ensemble_and_prefix_stability(seed in 0u64..10_000) {
        let p = straight_params(0.4, 0.4);
        let d = FrozenDensity { domain: p.potential.grid().domain.clone(), value: 0.3 };
        let x = generate_ensemble(&d, &p, &sde(20, seed, 0.5)).unwrap();
        let y = generate_ensemble(&d, &p, &sde(20, seed, 0.5)).unwrap();
        let z = generate_ensemble(&d, &p, &sde(21, seed, 0.5)).unwrap();
        prop_assert!(bit_equal(&x, &y));
        prop_assert!(bit_equal(&x, &z.truncated(20)));
    }
}

fn unscaled_pair(rho_star: f64) -> (ModelParams, DensityHistory, DensityHistory) {
    let p = straight_params(0.2, 0.4);
    let scaled = solve_fp(&p, 1.0, 0.005).unwrap();
    let opts = ForwardOptions {
        rho_max: rho_star,
        auto_substep: false,
    };
    let unscaled = solve_fp_with(&p, None, 1.0, 0.005, opts).unwrap();
    (p, scaled, unscaled)
}

#[test]
fn power_of_two_density_units_give_bitwise_identical_data() {
    let inf = InferenceConfig {
        sigma1: 1.0,
        sigma2: 1.0,
        mode: DensityMode::Transient,
        pde_dt: 0.005,
        forward_sigma: ForwardSigma::Model,
    };
    for rho_star in [2.0, 4.0] {
        let (p, scaled, unscaled) = unscaled_pair(rho_star);
        let cfg = sde(10, 3, 1.0);
        let x = generate_ensemble(&scaled, &p, &cfg).unwrap();
        let y = generate_ensemble(&unscaled, &p, &cfg).unwrap();
        assert!(bit_equal(&x, &y), "rho* = {rho_star}");
        let px = psi_ensemble(1.3, &x, &scaled, &p.potential, &inf).unwrap();
        let py = psi_ensemble(1.3, &y, &unscaled, &p.potential, &inf).unwrap();
        assert_eq!(px.to_bits(), py.to_bits());
    }
}

/// With ρ* = 5 the quotient (5ρ̃)/5 differs from ρ̃ in the last bit for a sizable
/// fraction of values, so the ensembles agree only to rounding until a boundary
/// decision flips. Run with `--ignored` to see it fail.
#[test]
#[ignore]
fn non_power_of_two_density_unit_gives_bitwise_identical_data() {
    let (p, scaled, unscaled) = unscaled_pair(5.0);
    let cfg = sde(10, 3, 1.0);
    let x = generate_ensemble(&scaled, &p, &cfg).unwrap();
    let y = generate_ensemble(&unscaled, &p, &cfg).unwrap();
    assert!(bit_equal(&x, &y));
}

#[test]
fn free_walkers_follow_the_constant_drift_law() {
    // walls far away, walker placed directly inside
    let pot = potential_for(DomainSpec::corridor(40.0, 20.0).unwrap(), 40, 20).unwrap();
    let p = ModelParams::new(1.5, 0.2, 0.4, 0.05, 0.05, pot.clone()).unwrap();
    let d = FrozenDensity {
        domain: pot.grid().domain.clone(),
        value: 0.0,
    };
    let (dt, steps, paths) = (1e-3, 500, 10_000);
    let x0 = Point::new(10.0, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut stats = BoundaryStats::default();
    let mut ends = Vec::with_capacity(paths);
    for _ in 0..paths {
        let mut x = x0;
        for k in 0..steps {
            let t = k as f64 * dt;
            let xi = (
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            );
            let prop = em_step(x, t, &d, &p, dt, xi).unwrap();
            match apply_boundary(x, prop, t, &d, &p, dt, &mut rng, &mut stats).unwrap() {
                BoundaryOutcome::Inside(q) => x = q,
                other => panic!("boundary reached: {other:?}"),
            }
        }
        ends.push(x.x);
    }
    let t = steps as f64 * dt;
    let (m, v) = mean_var(&ends);
    let (em, ev) = (x0.x + 1.5 * t, 2.0 * 0.05f64.powi(2) * t);
    let n = paths as f64;
    assert!((m - em).abs() < 4.0 * (ev / n).sqrt(), "mean {m} vs {em}");
    assert!(
        (v - ev).abs() < 4.0 * ev * (2.0 / (n - 1.0)).sqrt(),
        "var {v} vs {ev}"
    );
}

#[test]
fn frozen_density_ensemble_is_shareable_across_threads() {
    let p = straight_params(0.5, 0.5);
    let d: Arc<FrozenDensity> = Arc::new(FrozenDensity {
        domain: p.potential.grid().domain.clone(),
        value: 0.1,
    });
    let a = generate_ensemble(d.as_ref(), &p, &sde(8, 9, 0.3)).unwrap();
    let b = std::thread::spawn({
        let (d, p) = (d.clone(), p.clone());
        move || generate_ensemble(d.as_ref(), &p, &sde(8, 9, 0.3)).unwrap()
    })
    .join()
    .unwrap();
    assert!(bit_equal(&a, &b));
}
