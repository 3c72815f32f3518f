//! Run configuration files.
//!
//! A run file is TOML with a few sections. Only `problem` and `horizon` are
//! required; every other key falls back to the problem's defaults. Unknown
//! keys are rejected.
//!
//! ```toml
//! problem = "allen_cahn"
//! horizon = 1.0
//!
//! [schedule]
//! count = 4            # or: nodes = [...], or: delta = 1e-2 (and m = ...)
//!
//! [influence]
//! p_mode = "trainable" # right | midpoint
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::influence::Family;
use crate::network::Embedding;
use crate::oracle::SpectralConfig;
use crate::problem::{LossWeights, Problem};
use crate::trainer::{AdamConfig, Architecture, LbfgsConfig, PChoice, Precision, Sampling, TrainingConfig};

/// Default collocation count for the halving search.
pub const DEFAULT_PARTITION_M: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub enum Schedule {
    Nodes(Vec<f64>),
    Count(usize),
    Adaptive { delta: f64, m: usize },
}

impl Schedule {
    /// Explicit nodes over `[0, horizon]`; `None` for the adaptive mode.
    pub fn nodes(&self, horizon: f64) -> Option<Vec<f64>> {
        match self {
            Schedule::Nodes(n) => Some(n.clone()),
            Schedule::Count(c) => Some(
                (0..=*c)
                    .map(|k| if k == *c { horizon } else { horizon * k as f64 / *c as f64 })
                    .collect(),
            ),
            Schedule::Adaptive { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub problem: Problem,
    pub horizon: f64,
    pub schedule: Schedule,
    pub training: TrainingConfig,
    pub out: Option<PathBuf>,
    pub eval_grid: (usize, usize),
    pub oracle: OracleSettings,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSettings {
    pub nx: usize,
    pub dt: f64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        OracleSettings { nx: 512, dt: 1e-5 }
    }
}

impl OracleSettings {
    pub fn spectral(&self, t_end: f64) -> SpectralConfig {
        SpectralConfig::new(self.nx, self.dt, t_end)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    nodes: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    depth: Option<usize>,
    width: Option<usize>,
    /// `fourier` or `raw`.
    embedding: Option<String>,
    modes: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InfluenceFile {
    family: Option<Family>,
    p_mode: Option<PChoice>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainingFile {
    w_initial: Option<f64>,
    w_boundary: Option<f64>,
    w_residual: Option<f64>,
    n_initial: Option<usize>,
    n_boundary: Option<usize>,
    n_residual: Option<usize>,
    sampling: Option<Sampling>,
    warm_start: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvaluationFile {
    nx: Option<usize>,
    nt: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    problem: Option<String>,
    #[serde(alias = "T")]
    horizon: Option<f64>,
    seed: Option<u64>,
    precision: Option<Precision>,
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
    #[serde(default)]
    schedule: ScheduleFile,
    #[serde(default)]
    network: NetworkFile,
    #[serde(default)]
    influence: InfluenceFile,
    #[serde(default)]
    training: TrainingFile,
    adam: Option<AdamConfig>,
    lbfgs: Option<LbfgsConfig>,
    #[serde(default)]
    evaluation: EvaluationFile,
    oracle: Option<OracleSettings>,
}

fn bad(key: &str, why: impl std::fmt::Display) -> Error {
    Error::Config(format!("`{key}`: {why}"))
}

impl ConfigFile {
    fn resolve(self) -> Result<RunConfig> {
        let name = self.problem.ok_or_else(|| bad("problem", "missing required key"))?;
        let problem = Problem::by_name(&name).map_err(|e| bad("problem", e))?;
        let horizon = self.horizon.ok_or_else(|| bad("horizon", "missing required key"))?;
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(bad("horizon", format!("must be > 0 (got {horizon})")));
        }

        let s = self.schedule;
        let modes = [s.nodes.is_some(), s.count.is_some(), s.delta.is_some() || s.m.is_some()];
        let schedule = match modes.iter().filter(|&&b| b).count() {
            0 => Schedule::Count(1),
            1 => {
                if let Some(nodes) = s.nodes {
                    if nodes.len() < 2 || nodes.windows(2).any(|w| !(w[0] < w[1])) {
                        return Err(bad("schedule.nodes", "need at least two strictly increasing nodes"));
                    }
                    if nodes[0] != 0.0 || nodes[nodes.len() - 1] != horizon {
                        return Err(bad("schedule.nodes", format!("must run from 0 to horizon {horizon}")));
                    }
                    Schedule::Nodes(nodes)
                } else if let Some(count) = s.count {
                    if count == 0 {
                        return Err(bad("schedule.count", "must be at least 1"));
                    }
                    Schedule::Count(count)
                } else {
                    let delta = s.delta.ok_or_else(|| bad("schedule.delta", "required with `schedule.m`"))?;
                    if !(delta > 0.0) {
                        return Err(bad("schedule.delta", format!("must be > 0 (got {delta})")));
                    }
                    let m = s.m.unwrap_or(DEFAULT_PARTITION_M);
                    if m == 0 {
                        return Err(bad("schedule.m", "must be at least 1"));
                    }
                    Schedule::Adaptive { delta, m }
                }
            }
            _ => return Err(bad("schedule", "give exactly one of `nodes`, `count` or `delta`")),
        };

        let mut training = TrainingConfig::for_problem(&problem);
        let (depth, width, default_embedding) = problem.default_architecture();
        let n = self.network;
        let default_modes = match default_embedding {
            Embedding::Fourier { modes, .. } => modes,
            Embedding::Raw => 10,
        };
        let embedding = match n.embedding.as_deref() {
            None => match (default_embedding, n.modes) {
                (Embedding::Fourier { period, .. }, Some(modes)) => Embedding::Fourier { modes, period },
                (e, _) => e,
            },
            Some("raw") => Embedding::Raw,
            Some("fourier") => Embedding::Fourier {
                modes: n.modes.unwrap_or(default_modes),
                period: problem.period(),
            },
            Some(other) => return Err(bad("network.embedding", format!("expected fourier or raw (got `{other}`)"))),
        };
        training.architecture = Architecture {
            depth: n.depth.unwrap_or(depth),
            width: n.width.unwrap_or(width),
            embedding,
        };
        training.architecture.spec((0.0, 1.0)).map_err(|e| bad("network", e))?;

        if let Some(f) = self.influence.family {
            training.family = f;
        }
        if let Some(p) = self.influence.p_mode {
            training.p_choice = p;
        }
        let t = self.training;
        let w = training.weights;
        training.weights = LossWeights {
            initial: t.w_initial.unwrap_or(w.initial),
            boundary: t.w_boundary.unwrap_or(w.boundary),
            residual: t.w_residual.unwrap_or(w.residual),
        };
        for (key, v) in [
            ("training.w_initial", training.weights.initial),
            ("training.w_boundary", training.weights.boundary),
            ("training.w_residual", training.weights.residual),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(bad(key, format!("must be >= 0 (got {v})")));
            }
        }
        training.n_initial = t.n_initial.unwrap_or(training.n_initial);
        training.n_boundary = t.n_boundary.unwrap_or(training.n_boundary);
        training.n_residual = t.n_residual.unwrap_or(training.n_residual);
        for (key, v) in [
            ("training.n_initial", training.n_initial),
            ("training.n_boundary", training.n_boundary),
            ("training.n_residual", training.n_residual),
        ] {
            if v == 0 {
                return Err(bad(key, "must be at least 1"));
            }
        }
        training.sampling = t.sampling.unwrap_or(training.sampling);
        training.warm_start = t.warm_start.unwrap_or(false);
        if let Some(a) = self.adam {
            a.validate().map_err(|e| bad("adam", e))?;
            training.adam = a;
        }
        if let Some(l) = self.lbfgs {
            l.validate().map_err(|e| bad("lbfgs", e))?;
            training.lbfgs = l;
        }
        training.seed = self.seed.unwrap_or(0);
        training.precision = self.precision.unwrap_or_default();

        let eval_grid = (self.evaluation.nx.unwrap_or(256), self.evaluation.nt.unwrap_or(201));
        if eval_grid.0 < 2 || eval_grid.1 < 2 {
            return Err(bad("evaluation", format!("grid must be at least 2x2 (got {eval_grid:?})")));
        }
        let oracle = self.oracle.unwrap_or_default();
        if oracle.nx < 256 || !oracle.nx.is_power_of_two() {
            return Err(bad("oracle.nx", format!("must be a power of two >= 256 (got {})", oracle.nx)));
        }
        if !(oracle.dt > 0.0) {
            return Err(bad("oracle.dt", format!("must be > 0 (got {})", oracle.dt)));
        }
        Ok(RunConfig {
            problem,
            horizon,
            schedule,
            training,
            out: self.out,
            eval_grid,
            oracle,
        })
    }
}

impl RunConfig {
    /// Defaults for `problem` over `[0, horizon]` with a single interval.
    pub fn new(problem: &str, horizon: f64) -> Result<Self> {
        ConfigFile {
            problem: Some(problem.into()),
            horizon: Some(horizon),
            ..ConfigFile::default()
        }
        .resolve()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        file.resolve()
    }

    /// Fully resolved configuration; parsing it gives back `self`.
    pub fn to_toml(&self) -> String {
        let t = &self.training;
        let (embedding, modes) = match t.architecture.embedding {
            Embedding::Raw => ("raw", None),
            Embedding::Fourier { modes, .. } => ("fourier", Some(modes)),
        };
        let schedule = match &self.schedule {
            Schedule::Nodes(n) => ScheduleFile {
                nodes: Some(n.clone()),
                ..ScheduleFile::default()
            },
            Schedule::Count(c) => ScheduleFile {
                count: Some(*c),
                ..ScheduleFile::default()
            },
            Schedule::Adaptive { delta, m } => ScheduleFile {
                delta: Some(*delta),
                m: Some(*m),
                ..ScheduleFile::default()
            },
        };
        let file = ConfigFile {
            problem: Some(self.problem.name().into()),
            horizon: Some(self.horizon),
            seed: Some(t.seed),
            precision: Some(t.precision),
            out: self.out.clone(),
            schedule,
            network: NetworkFile {
                depth: Some(t.architecture.depth),
                width: Some(t.architecture.width),
                embedding: Some(embedding.into()),
                modes,
            },
            influence: InfluenceFile {
                family: Some(t.family),
                p_mode: Some(t.p_choice),
            },
            training: TrainingFile {
                w_initial: Some(t.weights.initial),
                w_boundary: Some(t.weights.boundary),
                w_residual: Some(t.weights.residual),
                n_initial: Some(t.n_initial),
                n_boundary: Some(t.n_boundary),
                n_residual: Some(t.n_residual),
                sampling: Some(t.sampling),
                warm_start: Some(t.warm_start),
            },
            adam: Some(t.adam),
            lbfgs: Some(t.lbfgs),
            evaluation: EvaluationFile {
                nx: Some(self.eval_grid.0),
                nt: Some(self.eval_grid.1),
            },
            oracle: Some(self.oracle),
        };
        toml::to_string(&file).expect("config serializes")
    }
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunConfig::from_toml(&text)
}
