//! Loss construction, optimizers and the interval-by-interval training loop.

mod adam;
mod lbfgs;
mod loss;
mod objective;
mod sampling;
mod solution;

pub use adam::{run_adam, AdamConfig, AdamResult};
pub use lbfgs::{run_lbfgs, LbfgsConfig, LbfgsResult, Termination};
pub use loss::{hard_field, HardLoss, LossModel, LossTerms, SoftLoss, Term, CHUNK};
pub use objective::{evaluate_model, Evaluation, FnObjective, Objective, Precision, TapeObjective};
pub use sampling::{latin_hypercube, sample_points, space_time_samples, PointSets, Sampling};
pub use solution::{ComposedSolution, TrainedInterval, TrainingSummary};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::influence::{Family, InfluenceSpec, DEFAULT_EPSILON};
use crate::network::{init_network, Embedding, NetworkSpec, ParamVector};
use crate::problem::{LossWeights, Problem};

/// How `p` is chosen on hard-constrained intervals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PChoice {
    /// Trained jointly with the network, initialized at the midpoint.
    #[default]
    Trainable,
    /// Fixed at the interval end.
    Right,
    /// Fixed at the interval midpoint.
    Midpoint,
}

impl std::str::FromStr for PChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trainable" | "thc" => Ok(PChoice::Trainable),
            "right" => Ok(PChoice::Right),
            "midpoint" => Ok(PChoice::Midpoint),
            other => Err(Error::Config(format!(
                "p mode must be trainable, right or midpoint (got `{other}`)"
            ))),
        }
    }
}

/// Network shape shared by every interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub depth: usize,
    pub width: usize,
    pub embedding: Embedding,
}

impl Architecture {
    pub fn for_problem(problem: &Problem) -> Self {
        let (depth, width, embedding) = problem.default_architecture();
        Architecture { depth, width, embedding }
    }

    pub fn spec(&self, t_span: (f64, f64)) -> Result<NetworkSpec> {
        NetworkSpec::new(self.depth, self.width, self.embedding, t_span)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub architecture: Architecture,
    pub weights: LossWeights,
    pub n_initial: usize,
    pub n_boundary: usize,
    pub n_residual: usize,
    pub adam: AdamConfig,
    pub lbfgs: LbfgsConfig,
    pub seed: u64,
    pub precision: Precision,
    pub sampling: Sampling,
    pub family: Family,
    pub p_choice: PChoice,
    /// Start each interval from the previous interval's weights.
    pub warm_start: bool,
}

impl TrainingConfig {
    /// Defaults for `problem`.
    pub fn for_problem(problem: &Problem) -> Self {
        TrainingConfig {
            architecture: Architecture::for_problem(problem),
            weights: problem.default_weights(),
            n_initial: 512,
            n_boundary: 512,
            n_residual: 10_000,
            adam: AdamConfig::default(),
            lbfgs: LbfgsConfig::default(),
            seed: 0,
            precision: Precision::F64,
            sampling: Sampling::LatinHypercube,
            family: Family::Cubic,
            p_choice: PChoice::Trainable,
            warm_start: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_initial == 0 || self.n_boundary == 0 || self.n_residual == 0 {
            return Err(Error::Config("collocation counts must be at least 1".into()));
        }
        let w = self.weights;
        if !(w.initial >= 0.0 && w.boundary >= 0.0 && w.residual >= 0.0) {
            return Err(Error::Config(format!("loss weights must be >= 0 (got {w:?})")));
        }
        self.adam.validate()?;
        self.lbfgs.validate()?;
        self.architecture.spec((0.0, 1.0))?;
        Ok(())
    }

    fn counts(&self) -> (usize, usize, usize) {
        (self.n_initial, self.n_boundary, self.n_residual)
    }
}

/// SplitMix64 mix of a master seed and a stream index.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Adam followed by L-BFGS. An early L-BFGS line-search failure restarts
/// L-BFGS once from the Adam result with a halved first step.
pub fn optimize<L: LossModel>(
    model: &L,
    params: Vec<f64>,
    config: &TrainingConfig,
) -> Result<(Vec<f64>, TrainingSummary)> {
    let obj = TapeObjective::new(model, config.precision);
    let adam = run_adam(&obj, &params, &config.adam)?;
    let mut restarted = false;
    let mut lbfgs = run_lbfgs(&obj, &adam.params, &config.lbfgs);
    let early_failure = match &lbfgs {
        Err(Error::Optimizer(_)) => true,
        Ok(r) => r.termination == Termination::LineSearchFailed && r.iterations < 10,
        Err(_) => false,
    };
    if early_failure {
        log::warn!("l-bfgs line search failed early; restarting with a halved step");
        restarted = true;
        let cfg = LbfgsConfig {
            initial_step: 0.5 * config.lbfgs.initial_step,
            ..config.lbfgs
        };
        lbfgs = run_lbfgs(&obj, &adam.params, &cfg);
    }
    let lbfgs = lbfgs?;
    let summary = TrainingSummary {
        adam_iterations: adam.trace.len(),
        adam_final_loss: adam.trace.last().copied().unwrap_or(f64::NAN),
        lbfgs_iterations: lbfgs.iterations,
        termination: lbfgs.termination,
        restarted,
        final_loss: lbfgs.loss,
        terms: LossTerms::default(),
    };
    Ok((lbfgs.params, summary))
}

fn influence_for(config: &TrainingConfig, t_span: (f64, f64)) -> Result<InfluenceSpec> {
    let (a, b) = t_span;
    match config.p_choice {
        PChoice::Trainable => InfluenceSpec::trainable_midpoint(config.family, a, b, DEFAULT_EPSILON),
        PChoice::Right => InfluenceSpec::fixed(config.family, a, b, b),
        PChoice::Midpoint => InfluenceSpec::fixed(config.family, a, b, 0.5 * (a + b)),
    }
}

/// Trains interval `index` (1-based) on `t_span`. The first interval uses the
/// standard loss; later ones are hard-constrained to `prev`.
pub fn train_interval(
    index: usize,
    prev: Option<&TrainedInterval>,
    problem: &Problem,
    t_span: (f64, f64),
    config: &TrainingConfig,
) -> Result<TrainedInterval> {
    let wrap = |e: Error| Error::IntervalTraining {
        interval: index,
        source: Box::new(e),
    };
    if index == 0 || (index == 1) != prev.is_none() {
        return Err(Error::Config(format!(
            "interval {index} needs {} previous interval",
            if index == 1 { "no" } else { "a" }
        )));
    }
    if !(t_span.0 < t_span.1) {
        return Err(Error::Config(format!("empty interval [{}, {}]", t_span.0, t_span.1)));
    }
    config.validate()?;
    let seed = derive_seed(config.seed, index as u64);
    let spec = config.architecture.spec(t_span)?;
    let mut init = init_network(&spec, derive_seed(seed, 0));
    if let Some(p) = prev.filter(|p| config.warm_start && p.params.len() == init.len()) {
        init.values.clone_from(&p.params.values);
    }
    let sets = sample_points(problem, t_span, config.counts(), config.sampling, derive_seed(seed, 1));
    let (values, influence, mut summary) = match prev {
        None => {
            let model = SoftLoss::new(problem, &spec, config.weights, &sets)?;
            let (v, mut s) = optimize(&model, init.values.clone(), config).map_err(wrap)?;
            s.terms = TapeObjective::new(&model, Precision::F64).evaluate(&v, false)?.terms;
            (v, None, s)
        }
        Some(prev) => {
            if (prev.t_span.1 - t_span.0).abs() > 0.0 {
                return Err(Error::Config(format!(
                    "interval {index} starts at {} but the previous one ends at {}",
                    t_span.0, prev.t_span.1
                )));
            }
            let inf = influence_for(config, t_span)?;
            let model = HardLoss::new(problem, &prev.spec, &prev.params.values, &spec, &inf, config.weights, &sets)?;
            let mut theta = init.values.clone();
            if let crate::influence::PMode::Trainable { rho, .. } = inf.p_mode {
                theta.push(rho);
            }
            let (mut v, mut s) = optimize(&model, theta, config).map_err(wrap)?;
            s.terms = TapeObjective::new(&model, Precision::F64).evaluate(&v, false)?.terms;
            let inf = if inf.is_trainable() {
                let rho = v.pop().expect("rho appended");
                inf.with_rho(rho)
            } else {
                inf
            };
            (v, Some(inf), s)
        }
    };
    summary.final_loss = summary.terms.weighted(&config.weights);
    spec.check_params(&values).map_err(wrap)?;
    Ok(TrainedInterval {
        index,
        t_span,
        spec,
        params: ParamVector { values, seed: init.seed },
        influence,
        summary,
    })
}

/// Trains every interval of `nodes` (`T_0 < T_1 < ... < T_n`) in order.
pub fn train_sequence(problem: &Problem, nodes: &[f64], config: &TrainingConfig) -> Result<ComposedSolution> {
    if nodes.len() < 2 || nodes.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config(format!("schedule nodes must increase strictly (got {nodes:?})")));
    }
    let mut solution = ComposedSolution::new(problem.clone(), config.precision, nodes[0]);
    for w in nodes.windows(2) {
        extend(&mut solution, w[1], config)?;
    }
    Ok(solution)
}

/// Trains one more interval ending at `t_end` and appends it.
pub fn extend(solution: &mut ComposedSolution, t_end: f64, config: &TrainingConfig) -> Result<()> {
    let start = solution.end();
    let k = solution.intervals.len() + 1;
    log::info!("training interval {k} on [{start}, {t_end}]");
    let trained = train_interval(k, solution.intervals.last(), &solution.problem, (start, t_end), config)?;
    solution.push(trained)
}
