use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};

use corridor_core::experiment::{build_likelihood, forward_density, ExperimentConfig};
use corridor_core::fp::{steady_state_1d, FpOperator, DEFAULT_STEADY_NODES};
use corridor_core::geometry::{build_grid, solve_eikonal};
use corridor_core::inference::psi_ensemble;
use corridor_core::trajectories::generate_ensemble;

fn fp_step(c: &mut Criterion) {
    let cfg = ExperimentConfig::preset("influx_a02_b04").unwrap();
    let params = cfg.model_params().unwrap();
    let op = FpOperator::new(&params, 0.005, 1.0).unwrap();
    let mut rho = vec![0.3; params.potential.grid().len()];
    c.bench_function("fp_step_120x10", |b| {
        b.iter(|| op.step(black_box(&mut rho)).unwrap())
    });
}

fn steady(c: &mut Criterion) {
    let params = ExperimentConfig::preset("outflux_a04_b02")
        .unwrap()
        .model_params()
        .unwrap();
    c.bench_function("steady_1d_default_nodes", |b| {
        b.iter(|| steady_state_1d(black_box(&params), DEFAULT_STEADY_NODES).unwrap())
    });
}

fn eikonal(c: &mut Criterion) {
    let cfg = ExperimentConfig::preset("bottleneck_outflux").unwrap();
    let grid = Arc::new(build_grid(cfg.domain.clone(), cfg.nx, cfg.ny).unwrap());
    c.bench_function("eikonal_bottleneck_120x20", |b| {
        b.iter(|| solve_eikonal(black_box(grid.clone())).unwrap())
    });
}

fn likelihood(c: &mut Criterion) {
    let cfg = ExperimentConfig::preset("influx_a02_b04").unwrap();
    let params = cfg.model_params().unwrap();
    let density = forward_density(&cfg, &params).unwrap();
    let ens = Arc::new(generate_ensemble(density.source(), &params, &cfg.sde).unwrap());
    c.bench_function("psi_ensemble_j20", |b| {
        b.iter(|| {
            psi_ensemble(
                1.4,
                &ens,
                density.source(),
                &params.potential,
                &cfg.inference,
            )
            .unwrap()
        })
    });
    let lik = build_likelihood(&cfg, &params, ens.clone());
    let mut v = 1.0;
    c.bench_function("likelihood_transient_uncached", |b| {
        b.iter(|| {
            v += 1e-6;
            lik.psi(black_box(v)).unwrap()
        })
    });
}

criterion_group!(benches, fp_step, steady, eikonal, likelihood);
criterion_main!(benches);
