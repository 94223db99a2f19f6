use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use corridor_core::experiment::{
    build_likelihood, forward_density, load_config, run_pipeline, sweep, Estimator,
    ExperimentConfig, ForwardDensity, RunManifest,
};
use corridor_core::fp::steady_state_1d;
use corridor_core::inference::{
    nelder_mead, pcn_sample, posterior_summary, write_chain_csv, write_map_trace_csv,
    write_summary, DensityMode,
};
use corridor_core::trajectories::{generate_ensemble, load_ensemble, save_ensemble};
use corridor_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "corridor",
    version,
    about = "Pedestrian corridor model: forward solves, trajectories and v_max inference"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Map,
    Pcn,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum DensityArg {
    Transient,
    Steady,
}

#[derive(Args)]
struct Common {
    /// Configuration file with [domain] [grid] [model] [sde] [inference] [prior] [run] sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset used as the base configuration.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed of the trajectory ensemble.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    estimator: Option<EstimatorArg>,
    /// Density behind both the data and the likelihood.
    #[arg(long, value_enum)]
    density: Option<DensityArg>,
    /// Extra overrides, e.g. `--set run.beta=0.2`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct DataArg {
    /// Trajectory CSV (with its .meta.json sidecar); defaults to <out>/trajectories.csv.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Stationary 1D profile of the straight corridor.
    Steady {
        #[command(flatten)]
        common: Common,
        /// Number of nodes; defaults to model.steady_nodes.
        #[arg(long)]
        nodes: Option<usize>,
    },
    /// Transient Fokker-Planck solve from the empty corridor.
    SolveFp {
        #[command(flatten)]
        common: Common,
    },
    /// Distance-to-exit potential and drift directions.
    Eikonal {
        #[command(flatten)]
        common: Common,
    },
    /// Trajectory ensemble for the true parameters.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// MAP estimate of v_max by Nelder-Mead.
    EstimateMap {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArg,
    },
    /// pCN posterior sample of v_max.
    EstimatePcn {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArg,
    },
    /// Forward solve, data generation, estimation and export.
    Pipeline {
        #[command(flatten)]
        common: Common,
    },
    /// One pipeline per value of a key, e.g. `--key sde.J --values 5,10,15,20`.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        key: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
}

fn resolve(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match (&c.config, &c.preset) {
        (Some(_), Some(_)) => {
            return Err(Error::ConfigField {
                field: "preset".into(),
                message: "give either --config or --preset; a config file can name its own preset"
                    .into(),
            })
        }
        (Some(path), None) => load_config(path)?,
        (None, Some(name)) => ExperimentConfig::preset(name)?,
        (None, None) => ExperimentConfig::default(),
    };
    if let Some(out) = &c.out {
        cfg.run.out = out.clone();
    }
    if let Some(seed) = c.seed {
        cfg.sde.base_seed = seed;
    }
    if let Some(e) = c.estimator {
        cfg.run.estimator = match e {
            EstimatorArg::Map => Estimator::Map,
            EstimatorArg::Pcn => Estimator::Pcn,
            EstimatorArg::Both => Estimator::Both,
        };
    }
    if let Some(d) = c.density {
        cfg.set_density(match d {
            DensityArg::Transient => DensityMode::Transient,
            DensityArg::Steady => DensityMode::Steady,
        });
    }
    for o in &c.overrides {
        let (key, value) = o.split_once('=').ok_or_else(|| Error::ConfigField {
            field: o.clone(),
            message: "expected SECTION.KEY=VALUE".into(),
        })?;
        cfg.set_dotted(key.trim(), value.trim())?;
    }
    cfg.validate()?;
    fs::create_dir_all(&cfg.run.out)?;
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn print_manifest(m: &RunManifest) {
    for t in &m.timings {
        println!(
            "stage {:<9} {:>9.3} s{}",
            t.stage,
            t.seconds,
            if t.cached { " (cached)" } else { "" }
        );
    }
    if let Some(map) = &m.estimates.map {
        println!("map_v = {:.6}", map.v_hat);
    }
    if let Some(p) = &m.estimates.posterior {
        println!(
            "posterior_mean = {:.6} (sd {:.4}, mcse {:.4}, acceptance {:.3})",
            p.mean, p.std_dev, p.mcse, p.acceptance_rate
        );
    }
    println!("output: {}", m.config.run.out.display());
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Steady { common, nodes } => {
            let cfg = resolve(&common)?;
            let params = cfg.model_params()?;
            let profile = steady_state_1d(&params, nodes.unwrap_or(cfg.model.steady_nodes))?;
            let path = cfg.run.out.join("steady.csv");
            let mut w = create(&path)?;
            profile.write_csv(&mut w)?;
            w.flush()?;
            let vals = profile.values();
            println!(
                "steady: {} Newton iterations, residual {:.2e}, rho(0) = {:.6}, rho(L/2) = {:.6}, rho(L) = {:.6}",
                profile.iterations(),
                profile.residual(),
                vals[0],
                vals[vals.len() / 2],
                vals[vals.len() - 1]
            );
            println!("wrote {}", path.display());
        }
        Command::SolveFp { common } => {
            let cfg = resolve(&common)?;
            let params = cfg.model_params()?;
            let mut c = cfg.clone();
            c.model.density = DensityMode::Transient;
            let ForwardDensity::Transient(h) = forward_density(&c, &params)? else {
                unreachable!()
            };
            let path = cfg.run.out.join("density.csv");
            let mut w = create(&path)?;
            h.write_csv(&mut w, cfg.run.snapshot_every)?;
            w.flush()?;
            let worst = h
                .reports()
                .iter()
                .map(|r| r.balance_residual().abs())
                .fold(0.0, f64::max);
            println!(
                "solve-fp: {} steps, final mass {:.6}, worst per-step balance residual {:.2e}, clamps {}",
                h.len() - 1,
                h.last().mass(),
                worst,
                h.clamp_events()
            );
            println!("wrote {}", path.display());
        }
        Command::Eikonal { common } => {
            let cfg = resolve(&common)?;
            let params = cfg.model_params()?;
            let path = cfg.run.out.join("potential.csv");
            let mut w = create(&path)?;
            params.potential.write_csv(&mut w)?;
            w.flush()?;
            println!("wrote {}", path.display());
        }
        Command::Generate { common } => {
            let cfg = resolve(&common)?;
            let params = cfg.model_params()?;
            let density = forward_density(&cfg, &params)?;
            let ens = generate_ensemble(density.source(), &params, &cfg.sde)?;
            let path = cfg.run.out.join("trajectories.csv");
            save_ensemble(&ens, &path)?;
            let exited = ens.trajectories.iter().filter(|t| t.exited).count();
            println!(
                "generate: {} walkers, {} entered, {} exited",
                ens.len(),
                ens.entered().count(),
                exited
            );
            println!("wrote {}", path.display());
        }
        Command::EstimateMap { common, data } => estimate(&common, &data, Estimator::Map)?,
        Command::EstimatePcn { common, data } => estimate(&common, &data, Estimator::Pcn)?,
        Command::Pipeline { common } => print_manifest(&run_pipeline(&resolve(&common)?)?),
        Command::Sweep {
            common,
            key,
            values,
        } => {
            let cfg = resolve(&common)?;
            for (v, m) in values.iter().zip(sweep(&cfg, &key, &values)?) {
                println!("== {key} = {v}");
                print_manifest(&m);
            }
        }
    }
    Ok(())
}

fn estimate(common: &Common, data: &DataArg, which: Estimator) -> Result<()> {
    let cfg = resolve(common)?;
    let params = cfg.model_params()?;
    let path = data
        .data
        .clone()
        .unwrap_or_else(|| cfg.run.out.join("trajectories.csv"));
    let ens = Arc::new(load_ensemble(&path)?);
    let lik = build_likelihood(&cfg, &params, ens);
    let out = &cfg.run.out;
    match which {
        Estimator::Map => {
            let m = nelder_mead(&lik, &cfg.prior, cfg.run.v_init, cfg.run.tol)?;
            let mut w = create(&out.join("map_trace.csv"))?;
            write_map_trace_csv(&m, &mut w)?;
            w.flush()?;
            write_summary(Some(&m), None, create(&out.join("summary.txt"))?)?;
            println!(
                "map_v = {:.6} after {} iterations (converged: {})",
                m.v_hat, m.iterations, m.converged
            );
        }
        _ => {
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
            let s = posterior_summary(&chain, cfg.run.bins)?;
            let mut w = create(&out.join("chain.csv"))?;
            write_chain_csv(&chain, &mut w)?;
            w.flush()?;
            write_summary(None, Some((&chain, &s)), create(&out.join("summary.txt"))?)?;
            println!(
                "posterior_mean = {:.6} (sd {:.4}, mcse {:.4}, acceptance {:.3})",
                s.mean, s.std_dev, s.mcse, s.acceptance_rate
            );
        }
    }
    println!("output: {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 3 })
        }
    }
}
