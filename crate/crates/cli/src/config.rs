//! Run configuration files.
//!
//! One experiment per file, TOML syntax:
//!
//! ```toml
//! experiment = "sdp_affine"
//! n = 10
//! m = 3
//! seeds = [0, 1, 2]
//! sizes = [[10, 3], [20, 5]]   # bench grid, overrides n and m
//!
//! [solver]
//! max_iter = 3000
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use fbse::problems::{
    benchmark_options, AFFINE_MU, BENCH_TOL, DEFAULT_CAP, DEFAULT_NU, SPHERE_MU, TOY_MU,
};
use fbse::{EnvelopeConfig, SolverOptions};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("missing required field `{0}`")]
    Missing(&'static str),
    #[error("invalid field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    SdpSphere,
    SdpAffine,
    Toy,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::SdpSphere => "sdp_sphere",
            Experiment::SdpAffine => "sdp_affine",
            Experiment::Toy => "toy",
        }
    }

    pub fn default_mu(self) -> f64 {
        match self {
            Experiment::SdpSphere => SPHERE_MU,
            Experiment::SdpAffine => AFFINE_MU,
            Experiment::Toy => TOY_MU,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
enum SizeEntry {
    N(usize),
    Nm(usize, usize),
}

/// Problem size of one benchmark cell. `m` is zero outside the affine family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Size {
    pub n: usize,
    pub m: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Option<Experiment>,
    n: Option<usize>,
    m: Option<usize>,
    sizes: Option<Vec<SizeEntry>>,
    nu: Option<f64>,
    cap: Option<f64>,
    mu: Option<f64>,
    l_tau: Option<f64>,
    tol: Option<f64>,
    target: Option<Vec<f64>>,
    seeds: Option<Vec<u64>>,
    check_samples: Option<usize>,
    output_dir: Option<PathBuf>,
    formats: Option<Vec<Format>>,
    solver: Option<toml::Table>,
}

/// A validated configuration.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub sizes: Vec<Size>,
    pub nu: f64,
    pub cap: f64,
    pub envelope: EnvelopeConfig,
    /// Target point of the toy family.
    pub target: Vec<f64>,
    pub seeds: Vec<u64>,
    pub check_samples: usize,
    pub output_dir: PathBuf,
    pub formats: BTreeSet<Format>,
    pub solver: SolverOptions,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: "<config>".into(),
            message: e.to_string(),
        })?;
        let experiment = raw.experiment.ok_or(ConfigError::Missing("experiment"))?;

        let sizes = match (&raw.sizes, experiment) {
            (Some(list), _) if list.is_empty() => {
                return Err(invalid("sizes", "must not be empty"))
            }
            (Some(list), _) => list
                .iter()
                .map(|e| match (e, experiment) {
                    (SizeEntry::Nm(n, m), Experiment::SdpAffine) => Ok(Size { n: *n, m: *m }),
                    (SizeEntry::N(n), Experiment::SdpAffine) => Ok(Size {
                        n: *n,
                        m: raw.m.ok_or(ConfigError::Missing("m"))?,
                    }),
                    (SizeEntry::N(n), _) => Ok(Size { n: *n, m: 0 }),
                    (SizeEntry::Nm(..), _) => Err(invalid(
                        "sizes",
                        "[n, m] pairs are only meaningful for sdp_affine",
                    )),
                })
                .collect::<Result<Vec<_>, _>>()?,
            (None, Experiment::Toy) => vec![Size {
                n: raw.n.unwrap_or(2),
                m: 0,
            }],
            (None, Experiment::SdpAffine) => vec![Size {
                n: raw.n.ok_or(ConfigError::Missing("n"))?,
                m: raw.m.ok_or(ConfigError::Missing("m"))?,
            }],
            (None, Experiment::SdpSphere) => vec![Size {
                n: raw.n.ok_or(ConfigError::Missing("n"))?,
                m: 0,
            }],
        };

        let target = raw.target.unwrap_or_else(|| vec![2.0, 0.0]);
        for s in &sizes {
            match experiment {
                Experiment::Toy if s.n != target.len() => {
                    return Err(invalid(
                        "n",
                        format!(
                            "toy dimension {} differs from target length {}",
                            s.n,
                            target.len()
                        ),
                    ));
                }
                Experiment::SdpSphere | Experiment::SdpAffine if s.n < 2 => {
                    return Err(invalid(
                        "n",
                        format!("matrix side must be at least 2, got {}", s.n),
                    ));
                }
                Experiment::SdpAffine if s.m == 0 || s.m > s.n * (s.n + 1) / 2 - 1 => {
                    return Err(invalid(
                        "m",
                        format!(
                            "must lie in [1, {}] for n = {}, got {}",
                            s.n * (s.n + 1) / 2 - 1,
                            s.n,
                            s.m
                        ),
                    ));
                }
                _ => {}
            }
        }
        if experiment == Experiment::Toy && !target.iter().any(|&t| t > 0.0) {
            return Err(invalid("target", "needs a positive coordinate"));
        }

        let positive = |field: &'static str, v: Option<f64>, default: f64| {
            let v = v.unwrap_or(default);
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(invalid(
                    field,
                    format!("must be positive and finite, got {v}"),
                ))
            }
        };
        let nu = positive("nu", raw.nu, DEFAULT_NU)?;
        let cap = positive("cap", raw.cap, DEFAULT_CAP)?;
        let mu = positive("mu", raw.mu, experiment.default_mu())?;
        let l_tau = positive("l_tau", raw.l_tau, 1.0)?;
        let tol = positive("tol", raw.tol, BENCH_TOL)?;
        let envelope = EnvelopeConfig {
            mu,
            l_tau,
            ..EnvelopeConfig::default()
        };

        let seeds = raw.seeds.unwrap_or_else(|| vec![0]);
        if seeds.is_empty() {
            return Err(invalid("seeds", "must not be empty"));
        }
        let check_samples = raw.check_samples.unwrap_or(1000);
        if check_samples == 0 {
            return Err(invalid("check_samples", "must be at least 1"));
        }
        let formats: BTreeSet<Format> = raw
            .formats
            .unwrap_or_else(|| vec![Format::Jsonl, Format::Csv])
            .into_iter()
            .collect();

        let solver = solver_options(mu, tol, raw.solver)?;
        Ok(Self {
            experiment,
            sizes,
            nu,
            cap,
            envelope,
            target,
            seeds,
            check_samples,
            output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("fbse-out")),
            formats,
            solver,
        })
    }
}

/// Benchmark defaults for `mu` and `tol`, then the `[solver]` table on top.
fn solver_options(
    mu: f64,
    tol: f64,
    overrides: Option<toml::Table>,
) -> Result<SolverOptions, ConfigError> {
    let base = benchmark_options(mu, tol);
    let Some(overrides) = overrides else {
        return Ok(base);
    };
    let mut table = toml::Table::try_from(&base).map_err(|e| invalid("solver", e.to_string()))?;
    for (key, value) in overrides {
        if key == "mu" {
            return Err(invalid("solver.mu", "set mu at the top level"));
        }
        if !table.contains_key(&key) {
            return Err(invalid(format!("solver.{key}"), "unknown solver option"));
        }
        table.insert(key, value);
    }
    let opts: SolverOptions = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| invalid("solver", e.message().to_string()))?;
    opts.validate()
        .map_err(|e| invalid("solver", e.to_string()))?;
    Ok(opts)
}
