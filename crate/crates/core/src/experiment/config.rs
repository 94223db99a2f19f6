//! Flat sectioned `key = value` configuration with named presets.
//!
//! ```text
//! [run]
//! preset = influx_a02_b04
//! estimator = both
//!
//! [model]
//! a = 0.25
//! ```
//!
//! A `preset` key (in `[run]`, or at the top of the file) selects the base
//! configuration; every other key overrides a single field. Unknown sections and
//! keys are errors.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fp::{ModelParams, DEFAULT_STEADY_NODES};
use crate::geometry::{potential_for, Bottleneck, DomainSpec};
use crate::inference::{DensityMode, ForwardSigma, InferenceConfig, Prior};
use crate::trajectories::SdeConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Map,
    Pcn,
    Both,
}

impl Estimator {
    pub fn map(self) -> bool {
        matches!(self, Estimator::Map | Estimator::Both)
    }

    pub fn pcn(self) -> bool {
        matches!(self, Estimator::Pcn | Estimator::Both)
    }
}

/// True model used to generate the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub v_max: f64,
    pub a: f64,
    pub b: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    /// Time step of the data-generating forward solve.
    pub pde_dt: f64,
    /// Transient solve or stationary profile behind the data.
    pub density: DensityMode,
    pub steady_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub estimator: Estimator,
    pub beta: f64,
    #[serde(rename = "N")]
    pub chain_length: usize,
    pub burn_in: f64,
    pub bins: usize,
    pub v_init: f64,
    pub tol: f64,
    pub chain_seed: u64,
    /// Write every n-th density field to the CSV export.
    pub snapshot_every: usize,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    pub domain: DomainSpec,
    pub nx: usize,
    pub ny: usize,
    pub model: ModelSpec,
    pub sde: SdeConfig,
    pub inference: InferenceConfig,
    pub inference_steady_nodes: usize,
    pub prior: Prior,
    pub run: RunSpec,
}

pub const PRESETS: [&str; 7] = [
    "influx_a02_b04",
    "influx_a01_b015",
    "outflux_a04_b02",
    "outflux_a045_b04",
    "maxcurrent_a09_b0975",
    "bottleneck_outflux",
    "bottleneck_influx",
];

impl Default for ExperimentConfig {
    /// Common corridor setup of the regime study with a = 0.2, b = 0.4.
    fn default() -> Self {
        Self {
            preset: None,
            domain: DomainSpec {
                length: 3.0,
                half_width: 0.25,
                bottleneck: None,
                exit_door_half_width: 0.25,
            },
            nx: 120,
            ny: 10,
            model: ModelSpec {
                v_max: 1.5,
                a: 0.2,
                b: 0.4,
                sigma1: 0.05,
                sigma2: 0.05,
                pde_dt: 0.005,
                density: DensityMode::Transient,
                steady_nodes: DEFAULT_STEADY_NODES,
            },
            sde: SdeConfig {
                dt: 1e-3,
                t_end: 2.0,
                count: 20,
                base_seed: 1,
                sigma1: 0.05,
                sigma2: 0.05,
            },
            inference: InferenceConfig {
                sigma1: 1.0,
                sigma2: 1.0,
                mode: DensityMode::Transient,
                pde_dt: 0.005,
                forward_sigma: ForwardSigma::Model,
            },
            inference_steady_nodes: DEFAULT_STEADY_NODES,
            prior: Prior { m: 1.0, c: 0.25 },
            run: RunSpec {
                estimator: Estimator::Both,
                beta: 0.1,
                chain_length: 5000,
                burn_in: 0.2,
                bins: 50,
                v_init: 1.0,
                tol: 1e-4,
                chain_seed: 2,
                snapshot_every: 10,
                out: PathBuf::from("out"),
            },
        }
    }
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let set_ab = |cfg: &mut Self, a, b| {
            cfg.model.a = a;
            cfg.model.b = b;
        };
        match name {
            "influx_a02_b04" => set_ab(&mut cfg, 0.2, 0.4),
            "influx_a01_b015" => set_ab(&mut cfg, 0.1, 0.15),
            "outflux_a04_b02" => set_ab(&mut cfg, 0.4, 0.2),
            "outflux_a045_b04" => set_ab(&mut cfg, 0.45, 0.4),
            "maxcurrent_a09_b0975" => set_ab(&mut cfg, 0.9, 0.975),
            "bottleneck_outflux" | "bottleneck_influx" => {
                if name == "bottleneck_outflux" {
                    set_ab(&mut cfg, 0.4, 0.2);
                } else {
                    set_ab(&mut cfg, 0.2, 0.4);
                }
                cfg.domain.bottleneck = Some(Bottleneck {
                    half_width: 0.05,
                    x_start: 1.2,
                    x_end: 1.8,
                });
                cfg.domain.exit_door_half_width = 0.15;
                cfg.ny = 20;
                cfg.model.sigma1 = 0.05;
                cfg.model.sigma2 = 0.03;
                cfg.sde.sigma1 = 0.05;
                cfg.sde.sigma2 = 0.03;
                cfg.sde.t_end = 1.0;
                cfg.model.pde_dt = 4e-3;
                cfg.inference.pde_dt = 4e-3;
            }
            other => {
                return Err(Error::ConfigField {
                    field: "preset".into(),
                    message: format!("unknown preset `{other}`; known: {}", PRESETS.join(", ")),
                })
            }
        }
        cfg.preset = Some(name.to_string());
        Ok(cfg)
    }

    /// Sets `section.key` from its textual value.
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let field = format!("{section}.{key}");
        let bad = |message: String| Error::ConfigField {
            field: field.clone(),
            message,
        };
        let f = || -> Result<f64> {
            value
                .parse::<f64>()
                .map_err(|e| bad(format!("expected a number, got `{value}` ({e})")))
        };
        let u = || -> Result<usize> {
            value
                .parse::<usize>()
                .map_err(|e| bad(format!("expected a count, got `{value}` ({e})")))
        };
        let seed = || -> Result<u64> {
            value
                .parse::<u64>()
                .map_err(|e| bad(format!("expected an integer, got `{value}` ({e})")))
        };
        let mode = || -> Result<DensityMode> {
            match value {
                "transient" => Ok(DensityMode::Transient),
                "steady" => Ok(DensityMode::Steady),
                _ => Err(bad(format!(
                    "expected `transient` or `steady`, got `{value}`"
                ))),
            }
        };

        match (section, key) {
            ("domain", "length") => self.domain.length = f()?,
            ("domain", "half_width") => {
                let full = self.domain.exit_door_half_width == self.domain.half_width;
                self.domain.half_width = f()?;
                if full {
                    self.domain.exit_door_half_width = self.domain.half_width;
                }
            }
            ("domain", "exit_door_half_width") => self.domain.exit_door_half_width = f()?,
            ("domain", "bottleneck") => match value {
                "none" => self.domain.bottleneck = None,
                _ => {
                    return Err(bad(
                        "only `none` is accepted; set the bottleneck_* keys instead".into(),
                    ))
                }
            },
            ("domain", "bottleneck_half_width" | "bottleneck_start" | "bottleneck_end") => {
                let b = self.domain.bottleneck.get_or_insert(Bottleneck {
                    half_width: 0.05,
                    x_start: 1.2,
                    x_end: 1.8,
                });
                match key {
                    "bottleneck_half_width" => b.half_width = f()?,
                    "bottleneck_start" => b.x_start = f()?,
                    _ => b.x_end = f()?,
                }
            }
            ("grid", "nx") => self.nx = u()?,
            ("grid", "ny") => self.ny = u()?,
            ("model", "v_max") => self.model.v_max = f()?,
            ("model", "a") => self.model.a = f()?,
            ("model", "b") => self.model.b = f()?,
            ("model", "sigma") => {
                let s = f()?;
                self.model.sigma1 = s;
                self.model.sigma2 = s;
                self.sde.sigma1 = s;
                self.sde.sigma2 = s;
            }
            ("model", "sigma1") => {
                self.model.sigma1 = f()?;
                self.sde.sigma1 = self.model.sigma1;
            }
            ("model", "sigma2") => {
                self.model.sigma2 = f()?;
                self.sde.sigma2 = self.model.sigma2;
            }
            ("model", "pde_dt") => self.model.pde_dt = f()?,
            ("model", "density") => self.model.density = mode()?,
            ("model", "steady_nodes") => self.model.steady_nodes = u()?,
            ("sde", "dt") => self.sde.dt = f()?,
            ("sde", "T") => self.sde.t_end = f()?,
            ("sde", "J") => self.sde.count = u()?,
            ("sde", "seed") => self.sde.base_seed = seed()?,
            ("sde", "sigma1") => self.sde.sigma1 = f()?,
            ("sde", "sigma2") => self.sde.sigma2 = f()?,
            ("inference", "sigma") => {
                let s = f()?;
                self.inference.sigma1 = s;
                self.inference.sigma2 = s;
            }
            ("inference", "sigma1") => self.inference.sigma1 = f()?,
            ("inference", "sigma2") => self.inference.sigma2 = f()?,
            ("inference", "density") => self.inference.mode = mode()?,
            ("inference", "pde_dt") => self.inference.pde_dt = f()?,
            ("inference", "forward_sigma") => {
                self.inference.forward_sigma = match value {
                    "model" => ForwardSigma::Model,
                    "inference" => ForwardSigma::Inference,
                    _ => {
                        return Err(bad(format!(
                            "expected `model` or `inference`, got `{value}`"
                        )))
                    }
                }
            }
            ("inference", "steady_nodes") => self.inference_steady_nodes = u()?,
            ("prior", "m") => self.prior.m = f()?,
            ("prior", "c") => self.prior.c = f()?,
            ("run", "estimator") => {
                self.run.estimator = match value {
                    "map" => Estimator::Map,
                    "pcn" => Estimator::Pcn,
                    "both" => Estimator::Both,
                    _ => return Err(bad(format!("expected map, pcn or both, got `{value}`"))),
                }
            }
            ("run", "beta") => self.run.beta = f()?,
            ("run", "N") => self.run.chain_length = u()?,
            ("run", "burn_in") => self.run.burn_in = f()?,
            ("run", "bins") => self.run.bins = u()?,
            ("run", "v_init") => self.run.v_init = f()?,
            ("run", "tol") => self.run.tol = f()?,
            ("run", "seed") => self.run.chain_seed = seed()?,
            ("run", "snapshot_every") => self.run.snapshot_every = u()?,
            ("run", "out") => self.run.out = PathBuf::from(value),
            _ => return Err(bad("unknown key".into())),
        }
        Ok(())
    }

    /// Sets a dotted key such as `run.beta`.
    pub fn set_dotted(&mut self, dotted: &str, value: &str) -> Result<()> {
        let (section, key) = dotted.split_once('.').ok_or_else(|| Error::ConfigField {
            field: dotted.into(),
            message: "expected `section.key`".into(),
        })?;
        self.set(section, key, value)
    }

    /// Sets the density source for both data generation and estimation.
    pub fn set_density(&mut self, mode: DensityMode) {
        self.model.density = mode;
        self.inference.mode = mode;
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut section: Option<String> = None;
        let mut preset = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| Error::ConfigParse {
                    line: line_no,
                    message: format!("unterminated section header `{line}`"),
                })?;
                let name = name.trim();
                if ![
                    "domain",
                    "grid",
                    "model",
                    "sde",
                    "inference",
                    "prior",
                    "run",
                ]
                .contains(&name)
                {
                    return Err(Error::ConfigParse {
                        line: line_no,
                        message: format!("unknown section `[{name}]`"),
                    });
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigParse {
                line: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(Error::ConfigParse {
                    line: line_no,
                    message: "empty key or value".into(),
                });
            }
            if key == "preset" && matches!(section.as_deref(), None | Some("run")) {
                if preset.is_some() {
                    return Err(Error::ConfigParse {
                        line: line_no,
                        message: "preset given twice".into(),
                    });
                }
                preset = Some((line_no, value.to_string()));
                continue;
            }
            let Some(sec) = section.clone() else {
                return Err(Error::ConfigParse {
                    line: line_no,
                    message: format!("key `{key}` outside any section"),
                });
            };
            entries.push((line_no, sec, key.to_string(), value.to_string()));
        }

        let mut cfg = match preset {
            Some((line, name)) => Self::preset(&name).map_err(|e| Error::ConfigParse {
                line,
                message: e.to_string(),
            })?,
            None => Self::default(),
        };
        for (line, sec, key, value) in entries {
            cfg.set(&sec, &key, &value).map_err(|e| match e {
                Error::ConfigField { field, message } => Error::ConfigParse {
                    line,
                    message: format!("`{field}`: {message}"),
                },
                other => other,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// All invariants, including the well-posedness bound a, b ≤ v_max.
    pub fn validate(&self) -> Result<()> {
        let field = |field: &str, message: String| Error::ConfigField {
            field: field.into(),
            message,
        };
        self.domain.validate()?;
        if self.nx < 4 || self.ny < 4 {
            return Err(field(
                "grid",
                format!("need at least 4 x 4 cells, got {} x {}", self.nx, self.ny),
            ));
        }
        let m = &self.model;
        if m.v_max <= 0.0 || !m.v_max.is_finite() {
            return Err(field(
                "model.v_max",
                format!("must be positive, got {}", m.v_max),
            ));
        }
        for (name, val) in [("model.a", m.a), ("model.b", m.b)] {
            if !(0.0..=m.v_max).contains(&val) {
                return Err(field(
                    name,
                    format!("must lie in [0, v_max = {}], got {val}", m.v_max),
                ));
            }
        }
        if !(m.sigma1 > 0.0 && m.sigma2 > 0.0) {
            return Err(field("model.sigma", "must be positive".into()));
        }
        let divides = |dt: f64| {
            let k = self.sde.t_end / dt;
            dt > 0.0 && (k - k.round()).abs() <= 1e-9 * k.max(1.0)
        };
        if m.density == DensityMode::Transient && !divides(m.pde_dt) {
            return Err(field(
                "model.pde_dt",
                format!(
                    "must be positive and divide T = {}, got {}",
                    self.sde.t_end, m.pde_dt
                ),
            ));
        }
        if self.inference.mode == DensityMode::Transient && !divides(self.inference.pde_dt) {
            return Err(field(
                "inference.pde_dt",
                format!(
                    "must be positive and divide T = {}, got {}",
                    self.sde.t_end, self.inference.pde_dt
                ),
            ));
        }
        if m.density == DensityMode::Steady || self.inference.mode == DensityMode::Steady {
            if !self.domain.is_straight() {
                return Err(field(
                    "model.density",
                    "steady profiles need a straight corridor".into(),
                ));
            }
            if m.steady_nodes < 3 || self.inference_steady_nodes < 3 {
                return Err(field("model.steady_nodes", "need at least 3 nodes".into()));
            }
        }
        self.sde
            .validate()
            .map_err(|e| field("sde", e.to_string()))?;
        self.inference
            .validate()
            .map_err(|e| field("inference", e.to_string()))?;
        self.prior
            .validate()
            .map_err(|e| field("prior", e.to_string()))?;
        let r = &self.run;
        if !(r.beta > 0.0 && r.beta <= 1.0) {
            return Err(field(
                "run.beta",
                format!("must lie in (0, 1], got {}", r.beta),
            ));
        }
        if r.chain_length == 0 {
            return Err(field("run.N", "must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&r.burn_in) {
            return Err(field(
                "run.burn_in",
                format!("fraction must lie in [0, 1), got {}", r.burn_in),
            ));
        }
        if !(r.v_init > 0.0) {
            return Err(field(
                "run.v_init",
                format!("must be positive, got {}", r.v_init),
            ));
        }
        if !(r.tol > 0.0) {
            return Err(field("run.tol", format!("must be positive, got {}", r.tol)));
        }
        if r.bins == 0 {
            return Err(field("run.bins", "must be at least 1".into()));
        }
        Ok(())
    }

    /// True model parameters on the configured grid.
    pub fn model_params(&self) -> Result<ModelParams> {
        let pot = potential_for(self.domain.clone(), self.nx, self.ny)?;
        let m = &self.model;
        let p = ModelParams::new(m.v_max, m.a, m.b, m.sigma1, m.sigma2, pot)?;
        p.validate_well_posed()?;
        Ok(p)
    }

    /// SHA-256 of the configuration without the output directory.
    pub fn checksum(&self) -> String {
        let mut c = self.clone();
        c.run.out = PathBuf::new();
        let json = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::ConfigField {
        field: "config".into(),
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    ExperimentConfig::parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn influx_preset_values() {
        let c = ExperimentConfig::parse("[run]\npreset = influx_a02_b04\n").unwrap();
        assert_eq!((c.model.a, c.model.b, c.model.v_max), (0.2, 0.4, 1.5));
        assert_eq!((c.sde.sigma1, c.sde.sigma2), (0.05, 0.05));
        assert_eq!((c.domain.length, 2.0 * c.domain.half_width), (3.0, 0.5));
        assert_eq!((c.sde.t_end, c.sde.dt), (2.0, 1e-3));
    }

    #[test]
    fn bottleneck_preset_values() {
        let c = ExperimentConfig::preset("bottleneck_outflux").unwrap();
        assert_eq!((c.sde.sigma1, c.sde.sigma2), (0.05, 0.03));
        let b = c.domain.bottleneck.unwrap();
        assert!((2.0 * b.half_width - 0.1).abs() < 1e-15);
        assert!((2.0 * c.domain.exit_door_half_width - 0.3).abs() < 1e-15);
        assert_eq!(
            (c.sde.t_end, c.model.pde_dt, c.model.a, c.model.b),
            (1.0, 4e-3, 0.4, 0.2)
        );
        c.validate().unwrap();
    }

    #[test]
    fn well_posedness_violation_names_the_field() {
        let err = ExperimentConfig::parse("[model]\na = 2.0\n").unwrap_err();
        assert!(err.is_config_error());
        assert!(err.to_string().contains("model.a"), "{err}");
    }

    #[test]
    fn unknown_keys_and_sections_report_lines() {
        let err = ExperimentConfig::parse("[model]\nv_max = 1.5\nvmax = 2\n").unwrap_err();
        assert!(matches!(err, Error::ConfigParse { line: 3, .. }), "{err}");
        let err = ExperimentConfig::parse("\n[modle]\n").unwrap_err();
        assert!(matches!(err, Error::ConfigParse { line: 2, .. }), "{err}");
        let err = ExperimentConfig::parse("[sde]\nJ = twenty\n").unwrap_err();
        assert!(matches!(err, Error::ConfigParse { line: 2, .. }), "{err}");
        let err = ExperimentConfig::parse("a = 1\n").unwrap_err();
        assert!(matches!(err, Error::ConfigParse { line: 1, .. }), "{err}");
    }

    #[test]
    fn overrides_apply_on_top_of_preset() {
        let text = "preset = outflux_a04_b02\n[sde]\nJ = 5 # fewer\n[inference]\nsigma = 0.05\ndensity = steady\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!((c.model.a, c.sde.count, c.inference.sigma1), (0.4, 5, 0.05));
        assert_eq!(c.inference.mode, DensityMode::Steady);
    }

    #[test]
    fn checksum_ignores_output_directory() {
        let mut a = ExperimentConfig::default();
        let b = a.clone();
        a.run.out = PathBuf::from("elsewhere");
        assert_eq!(a.checksum(), b.checksum());
        a.run.beta = 0.2;
        assert_ne!(a.checksum(), b.checksum());
    }

    #[test]
    fn every_preset_is_valid() {
        for name in PRESETS {
            ExperimentConfig::preset(name).unwrap().validate().unwrap();
        }
        assert!(ExperimentConfig::preset("nope")
            .unwrap_err()
            .is_config_error());
    }
}
