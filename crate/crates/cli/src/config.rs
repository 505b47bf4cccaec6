//! Experiment configuration: one flat TOML table.
//!
//! Sweepable keys accept a scalar or a nonempty list; the sweep is the
//! cartesian product of all listed keys in the order
//! `n, n_vars, m, t, alpha, a`.

use std::path::{Path, PathBuf};

use mdep_clt::generators::{heavy_tail_example_spec, moving_window_spec, two_scale_example_spec};
use mdep_clt::{ArraySpec, MarginalModel, Metric};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn values(&self, key: &str) -> Result<Vec<T>, CliError> {
        match self {
            OneOrMany::One(v) => Ok(vec![v.clone()]),
            OneOrMany::Many(v) if v.is_empty() => Err(CliError::Config(format!("sweep `{key}` is empty"))),
            OneOrMany::Many(v) => Ok(v.clone()),
        }
    }
}

fn need<T>(v: Option<Vec<T>>, key: &str) -> Result<Vec<T>, CliError> {
    v.ok_or_else(|| CliError::Config(format!("family needs key `{key}`")))
}

fn values<T: Clone>(key: &str, v: &Option<OneOrMany<T>>) -> Result<Option<Vec<T>>, CliError> {
    v.as_ref().map(|x| x.values(key)).transpose()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    TwoScale,
    HeavyTail,
    MovingWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Innovation {
    Rademacher,
    Normal,
    HeavyTail,
    Uniform,
}

impl Innovation {
    pub fn model(self) -> MarginalModel {
        match self {
            Innovation::Rademacher => MarginalModel::rademacher(),
            Innovation::Normal => MarginalModel::standard_normal(),
            Innovation::HeavyTail => MarginalModel::heavy_tail(),
            Innovation::Uniform => MarginalModel::uniform_symmetric(1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TRule {
    /// `t = m²`
    MSquared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundChoice {
    M1,
    M2,
}

/// Raw config file contents.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: Option<FamilyName>,
    /// two-scale row length
    pub n: Option<OneOrMany<usize>>,
    pub alpha: Option<OneOrMany<f64>>,
    pub a: Option<OneOrMany<f64>>,
    /// dependence range (heavy-tail, moving-window)
    pub m: Option<OneOrMany<usize>>,
    pub t: Option<OneOrMany<usize>>,
    pub t_rule: Option<TRule>,
    /// moving-window row length
    pub n_vars: Option<OneOrMany<usize>>,
    pub innovation: Option<Innovation>,
    pub weights: Option<Vec<f64>>,
    pub replicates: Option<usize>,
    pub seed: Option<u64>,
    /// "min:max:points"
    pub c_grid: Option<String>,
    pub metrics: Option<Vec<String>>,
    pub bound: Option<BoundChoice>,
    pub bins: Option<usize>,
    pub out: Option<PathBuf>,
    /// verify-internals: number of random chains
    pub chains: Option<usize>,
    pub max_chain_n: Option<usize>,
}

pub const DEFAULT_REPLICATES: usize = 10_000;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_BINS: usize = 64;
pub const DEFAULT_CHAINS: usize = 50;
pub const DEFAULT_MAX_CHAIN_N: usize = 10;

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn replicates(&self) -> usize {
        self.replicates.unwrap_or(DEFAULT_REPLICATES)
    }

    pub fn metrics(&self) -> Result<Vec<Metric>, CliError> {
        match &self.metrics {
            None => Ok(vec![Metric::W, Metric::K]),
            Some(v) if v.is_empty() => Err(CliError::Config("`metrics` is empty".into())),
            Some(v) => v
                .iter()
                .map(|s| s.parse::<Metric>().map_err(|e| CliError::Config(e.to_string())))
                .collect(),
        }
    }

    /// Parsed `c_grid`, if set.
    pub fn c_grid(&self) -> Result<Option<Vec<f64>>, CliError> {
        self.c_grid.as_deref().map(parse_c_grid).transpose()
    }

    /// Resolves the sweep into concrete specs, in deterministic order.
    pub fn sweep(&self) -> Result<Vec<SweepPoint>, CliError> {
        let family = self
            .family
            .ok_or_else(|| CliError::Config("missing key `family`".into()))?;
        let ns = values("n", &self.n)?;
        let n_vars = values("n_vars", &self.n_vars)?;
        let ms = values("m", &self.m)?;
        let ts = values("t", &self.t)?;
        let alphas = values("alpha", &self.alpha)?;
        let as_ = values("a", &self.a)?;
        let mut out = Vec::new();
        match family {
            FamilyName::TwoScale => {
                let ns = need(ns, "n")?;
                let alphas = need(alphas, "alpha")?;
                let as_ = need(as_, "a")?;
                for &n in &ns {
                    for &alpha in &alphas {
                        for &a in &as_ {
                            out.push(SweepPoint {
                                params: Params { n: Some(n), alpha: Some(alpha), a: Some(a), ..Params::default() },
                                spec: two_scale_example_spec(n, alpha, a).map_err(CliError::from_spec)?,
                            });
                        }
                    }
                }
            }
            FamilyName::HeavyTail => {
                let ms = need(ms, "m")?;
                for &m in &ms {
                    let t_values = match (self.t_rule, &ts) {
                        (Some(TRule::MSquared), _) => vec![m * m],
                        (None, Some(ts)) => ts.clone(),
                        (None, None) => return Err(CliError::Config("heavy-tail needs `t` or `t_rule`".into())),
                    };
                    for t in t_values {
                        out.push(SweepPoint {
                            params: Params { m: Some(m), t: Some(t), ..Params::default() },
                            spec: heavy_tail_example_spec(m, t).map_err(CliError::from_spec)?,
                        });
                    }
                }
            }
            FamilyName::MovingWindow => {
                let n_vars = need(n_vars, "n_vars")?;
                let ms = ms.unwrap_or_else(|| vec![1]);
                let innovation = self.innovation.unwrap_or(Innovation::Normal);
                for &nv in &n_vars {
                    for &m in &ms {
                        let weights = match &self.weights {
                            Some(w) => w.clone(),
                            None => vec![1.0; m + 1],
                        };
                        out.push(SweepPoint {
                            params: Params {
                                n_vars: Some(nv),
                                m: Some(m),
                                innovation: Some(innovation),
                                ..Params::default()
                            },
                            spec: moving_window_spec(nv, m, innovation.model(), weights).map_err(CliError::from_spec)?,
                        });
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Parameters that produced one spec, for the output tables.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Params {
    pub n: Option<usize>,
    pub n_vars: Option<usize>,
    pub m: Option<usize>,
    pub t: Option<usize>,
    pub alpha: Option<f64>,
    pub a: Option<f64>,
    pub innovation: Option<Innovation>,
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub params: Params,
    pub spec: ArraySpec,
}

/// `"min:max:points"` → log-spaced grid.
pub fn parse_c_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || CliError::Config(format!("c-grid must look like min:max:points, got `{s}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let points: usize = parts[2].trim().parse().map_err(|_| bad())?;
    mdep_clt::bounds::log_grid(lo, hi, points).map_err(|e| CliError::Config(e.to_string()))
}
