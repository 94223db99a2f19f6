//! Forward solve, data generation, estimation and export, with per-stage caching.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::fp::{
    classify_regime, solve_fp_with, steady_state_1d, DensityHistory, DensitySource, ForwardOptions,
    ModelParams, SteadyProfile,
};
use crate::inference::{
    nelder_mead, pcn_sample, posterior_summary, write_chain_csv, write_map_trace_csv,
    write_summary, DensityMode, ForwardModel, ForwardSigma, Likelihood, MapResult,
    PosteriorSummary, SteadyForward, TransientForward,
};
use crate::trajectories::{generate_ensemble, load_ensemble, save_ensemble, Ensemble};

const CACHE_DIR: &str = ".cache";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
    pub cached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub sde_base_seed: u64,
    pub chain_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapOutcome {
    pub v_hat: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Estimates {
    pub map: Option<MapOutcome>,
    pub posterior: Option<PosteriorSummary>,
    pub forward_failures: usize,
    pub likelihood_evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub config_checksum: String,
    pub version: String,
    pub seeds: Seeds,
    pub timings: Vec<StageTiming>,
    pub estimates: Estimates,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn file(&self, path: &str) -> Option<&FileEntry> {
        self.files.iter().find(|f| f.path == path)
    }
}

/// The density behind the data: a transient history or a stationary profile.
pub enum ForwardDensity {
    Transient(DensityHistory),
    Steady(SteadyProfile),
}

impl ForwardDensity {
    pub fn source(&self) -> &dyn DensitySource {
        match self {
            ForwardDensity::Transient(h) => h,
            ForwardDensity::Steady(s) => s,
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn key_of<T: Serialize>(parts: &T) -> String {
    sha256_hex(&serde_json::to_vec(parts).expect("cache key serializes"))
}

struct Cache {
    dir: PathBuf,
}

impl Cache {
    fn key_path(&self, stage: &str) -> PathBuf {
        self.dir.join(format!("{stage}.key"))
    }

    /// Stage is cached if its key matches and all listed files exist.
    fn hit(&self, stage: &str, key: &str, files: &[&Path]) -> bool {
        fs::read_to_string(self.key_path(stage))
            .map(|k| k.trim() == key)
            .unwrap_or(false)
            && files.iter().all(|f| f.exists())
    }

    fn store(&self, stage: &str, key: &str) -> Result<()> {
        fs::write(self.key_path(stage), key)?;
        Ok(())
    }

    fn invalidate(&self, stage: &str) {
        let _ = fs::remove_file(self.key_path(stage));
    }
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage: name,
        source: Box::new(e),
    })
}

/// Data-generating density for the true parameters; a CFL violation is an error.
pub fn forward_density(cfg: &ExperimentConfig, params: &ModelParams) -> Result<ForwardDensity> {
    match cfg.model.density {
        DensityMode::Transient => Ok(ForwardDensity::Transient(solve_fp_with(
            params,
            None,
            cfg.sde.t_end,
            cfg.model.pde_dt,
            ForwardOptions::default(),
        )?)),
        DensityMode::Steady => Ok(ForwardDensity::Steady(steady_state_1d(
            params,
            cfg.model.steady_nodes,
        )?)),
    }
}

/// Likelihood of `data` under the configured inference setup.
pub fn build_likelihood(
    cfg: &ExperimentConfig,
    truth: &ModelParams,
    data: Arc<Ensemble>,
) -> Likelihood {
    let inf = cfg.inference;
    let params = match inf.forward_sigma {
        ForwardSigma::Model => truth.clone(),
        ForwardSigma::Inference => truth.with_sigma(inf.sigma1, inf.sigma2),
    };
    let potential = params.potential.clone();
    let forward: Box<dyn ForwardModel> = match inf.mode {
        DensityMode::Transient => Box::new(TransientForward {
            params,
            t_end: cfg.sde.t_end,
            dt: inf.pde_dt,
            rho_max: 1.0,
        }),
        DensityMode::Steady => Box::new(SteadyForward {
            params,
            nodes: cfg.inference_steady_nodes,
        }),
    };
    Likelihood::new(data, forward, potential, inf)
}

/// Runs every stage and writes the outputs plus `manifest.json` into `cfg.run.out`.
///
/// Output files are written as soon as their stage finishes, so a failing stage
/// leaves the earlier outputs in place.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let out = cfg.run.out.clone();
    let cache = Cache {
        dir: out.join(CACHE_DIR),
    };
    fs::create_dir_all(&cache.dir)?;
    let mut timings = Vec::new();
    let mut files = Vec::new();

    // forward
    let t0 = Instant::now();
    let params = stage("forward", cfg.model_params())?;
    let fwd_key = key_of(&(
        "forward",
        &cfg.domain,
        cfg.nx,
        cfg.ny,
        &cfg.model,
        cfg.sde.t_end,
    ));
    let (density_csv, blob) = match cfg.model.density {
        DensityMode::Transient => ("density.csv", cache.dir.join("density.bin")),
        DensityMode::Steady => ("steady.csv", cache.dir.join("steady.bin")),
    };
    let fwd_hit = cache.hit(
        "forward",
        &fwd_key,
        &[&blob, &out.join(density_csv), &out.join("potential.csv")],
    );
    let density = stage(
        "forward",
        (|| {
            if fwd_hit {
                let bytes = fs::read(&blob)?;
                return Ok(match cfg.model.density {
                    DensityMode::Transient => ForwardDensity::Transient(
                        DensityHistory::from_bytes(params.potential.grid().clone(), &bytes)?,
                    ),
                    DensityMode::Steady => ForwardDensity::Steady(SteadyProfile::from_bytes(
                        cfg.domain.clone(),
                        &bytes,
                    )?),
                });
            }
            cache.invalidate("forward");
            let d = forward_density(cfg, &params)?;
            write_file(&out.join("potential.csv"), |w| {
                params.potential.write_csv(w)
            })?;
            match &d {
                ForwardDensity::Transient(h) => {
                    write_file(&out.join(density_csv), |w| {
                        h.write_csv(w, cfg.run.snapshot_every.max(1))
                    })?;
                    fs::write(&blob, h.to_bytes())?;
                    if h.clamp_events() > 0 {
                        log::warn!("forward solve clamped {} cell values", h.clamp_events());
                    }
                }
                ForwardDensity::Steady(s) => {
                    write_file(&out.join(density_csv), |w| s.write_csv(w))?;
                    fs::write(&blob, s.to_bytes())?;
                }
            }
            cache.store("forward", &fwd_key)?;
            Ok(d)
        })(),
    )?;
    files.push("potential.csv".to_string());
    files.push(density_csv.to_string());
    timings.push(StageTiming {
        stage: "forward".into(),
        seconds: t0.elapsed().as_secs_f64(),
        cached: fwd_hit,
    });

    // generate
    let t0 = Instant::now();
    let traj_csv = out.join("trajectories.csv");
    let gen_key = key_of(&("generate", &fwd_key, &cfg.sde));
    let gen_hit = cache.hit("generate", &gen_key, &[&traj_csv]);
    let ensemble = stage(
        "generate",
        (|| {
            if gen_hit {
                return load_ensemble(&traj_csv);
            }
            cache.invalidate("generate");
            let ens = generate_ensemble(density.source(), &params, &cfg.sde)?;
            save_ensemble(&ens, &traj_csv)?;
            cache.store("generate", &gen_key)?;
            Ok(ens)
        })(),
    )?;
    let ensemble = Arc::new(ensemble);
    files.push("trajectories.csv".to_string());
    files.push("trajectories.meta.json".to_string());
    timings.push(StageTiming {
        stage: "generate".into(),
        seconds: t0.elapsed().as_secs_f64(),
        cached: gen_hit,
    });

    // estimate
    let t0 = Instant::now();
    let est_key = key_of(&(
        "estimate",
        &gen_key,
        &cfg.inference,
        cfg.inference_steady_nodes,
        &cfg.prior,
        &cfg.run.estimator,
        cfg.run.beta,
        cfg.run.chain_length,
        cfg.run.burn_in,
        cfg.run.bins,
        cfg.run.v_init,
        cfg.run.tol,
        cfg.run.chain_seed,
    ));
    let est_json = cache.dir.join("estimates.json");
    let mut est_files = vec!["summary.txt"];
    if cfg.run.estimator.map() {
        est_files.push("map_trace.csv");
    }
    if cfg.run.estimator.pcn() {
        est_files.push("chain.csv");
    }
    let est_paths: Vec<PathBuf> = est_files
        .iter()
        .map(|f| out.join(f))
        .chain([est_json.clone()])
        .collect();
    let est_refs: Vec<&Path> = est_paths.iter().map(|p| p.as_path()).collect();
    let est_hit = cache.hit("estimate", &est_key, &est_refs);
    let estimates = stage(
        "estimate",
        (|| {
            if est_hit {
                return Ok(serde_json::from_slice::<Estimates>(&fs::read(&est_json)?)?);
            }
            cache.invalidate("estimate");
            let lik = build_likelihood(cfg, &params, ensemble.clone());
            let mut est = Estimates::default();
            let mut map_res: Option<MapResult> = None;
            if cfg.run.estimator.map() {
                let m = nelder_mead(&lik, &cfg.prior, cfg.run.v_init, cfg.run.tol)?;
                write_file(&out.join("map_trace.csv"), |w| write_map_trace_csv(&m, w))?;
                est.map = Some(MapOutcome {
                    v_hat: m.v_hat,
                    objective: m.objective,
                    iterations: m.iterations,
                    converged: m.converged,
                });
                map_res = Some(m);
            }
            let mut chain_res = None;
            if cfg.run.estimator.pcn() {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.chain_seed);
                let mut chain = pcn_sample(
                    &lik,
                    &cfg.prior,
                    cfg.run.beta,
                    cfg.run.chain_length,
                    cfg.run.v_init,
                    &mut rng,
                )?;
                chain.burn_in = ((chain.samples.len() as f64) * cfg.run.burn_in).floor() as usize;
                write_file(&out.join("chain.csv"), |w| write_chain_csv(&chain, w))?;
                let summary = posterior_summary(&chain, cfg.run.bins)?;
                est.forward_failures = chain.forward_failures;
                est.posterior = Some(summary.clone());
                chain_res = Some((chain, summary));
            }
            est.likelihood_evaluations = lik.evaluations();
            write_file(&out.join("summary.txt"), |w| {
                writeln!(w, "preset = {}", cfg.preset.as_deref().unwrap_or("none"))?;
                writeln!(w, "config_checksum = {}", cfg.checksum())?;
                writeln!(w, "true_v_max = {}", cfg.model.v_max)?;
                writeln!(w, "a = {}", cfg.model.a)?;
                writeln!(w, "b = {}", cfg.model.b)?;
                writeln!(w, "regime = {:?}", classify_regime(&params))?;
                writeln!(w, "data_density = {:?}", cfg.model.density)?;
                writeln!(w, "inference_density = {:?}", cfg.inference.mode)?;
                writeln!(
                    w,
                    "inference_sigma = {} {}",
                    cfg.inference.sigma1, cfg.inference.sigma2
                )?;
                writeln!(w, "trajectories = {}", ensemble.len())?;
                writeln!(w, "entered = {}", ensemble.entered().count())?;
                writeln!(
                    w,
                    "exited = {}",
                    ensemble.trajectories.iter().filter(|t| t.exited).count()
                )?;
                writeln!(w, "prior = N({}, {})", cfg.prior.m, cfg.prior.c)?;
                write_summary(
                    map_res.as_ref(),
                    chain_res.as_ref().map(|(c, s)| (c, s)),
                    &mut *w,
                )
            })?;
            fs::write(&est_json, serde_json::to_vec_pretty(&est)?)?;
            cache.store("estimate", &est_key)?;
            Ok(est)
        })(),
    )?;
    files.extend(est_files.iter().map(|s| s.to_string()));
    timings.push(StageTiming {
        stage: "estimate".into(),
        seconds: t0.elapsed().as_secs_f64(),
        cached: est_hit,
    });

    // export
    let t0 = Instant::now();
    let files = stage(
        "export",
        files
            .iter()
            .map(|f| inventory(&out, f))
            .collect::<Result<Vec<_>>>(),
    )?;
    timings.push(StageTiming {
        stage: "export".into(),
        seconds: t0.elapsed().as_secs_f64(),
        cached: false,
    });
    let manifest = RunManifest {
        config: cfg.clone(),
        config_checksum: cfg.checksum(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seeds: Seeds {
            sde_base_seed: cfg.sde.base_seed,
            chain_seed: cfg.run.chain_seed,
        },
        timings,
        estimates,
        files,
    };
    stage(
        "export",
        (|| {
            fs::write(
                out.join("manifest.json"),
                serde_json::to_vec_pretty(&manifest)?,
            )?;
            Ok(())
        })(),
    )?;
    Ok(manifest)
}

fn inventory(out: &Path, rel: &str) -> Result<FileEntry> {
    let bytes = fs::read(out.join(rel))?;
    Ok(FileEntry {
        path: rel.to_string(),
        sha256: sha256_hex(&bytes),
        bytes: bytes.len() as u64,
    })
}

/// One pipeline per value of `key`, each in `out/<key>=<value>`, run concurrently.
pub fn sweep(base: &ExperimentConfig, key: &str, values: &[String]) -> Result<Vec<RunManifest>> {
    let configs = values
        .iter()
        .map(|v| {
            let mut c = base.clone();
            c.set_dotted(key, v)?;
            c.run.out = base.run.out.join(format!("{key}={v}"));
            c.validate()?;
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    configs.par_iter().map(run_pipeline).collect()
}
