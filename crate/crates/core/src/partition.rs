//! Choosing a uniform interval length by repeated halving.
//!
//! A standard PINN is trained on `[0, T]` and on `[0, T/2]`; when the two
//! disagree on the shared half by more than `delta`, and the disagreement is
//! still shrinking, `T` is halved and the test repeats.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::forward_batch;
use crate::problem::Problem;
use crate::trainer::{derive_seed, space_time_samples, train_interval, TrainedInterval, TrainingConfig};

pub const INITIAL_D_LAST: f64 = 1.0e15;

/// Most halvings before the search is cut short.
pub const MAX_HALVINGS: usize = 10;

/// Relative L2 distance between `full` and `half`, normalized by `half`.
pub fn discrepancy(full: &[f64], half: &[f64]) -> Result<f64> {
    if full.is_empty() || full.len() != half.len() {
        return Err(Error::Config(format!(
            "discrepancy needs equal non-empty samples (got {} and {})",
            full.len(),
            half.len()
        )));
    }
    let num: f64 = full.iter().zip(half).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = half.iter().map(|b| b * b).sum();
    if !(den > 0.0) {
        return Err(Error::Degenerate("half-interval solution vanishes on every sample".into()));
    }
    Ok((num / den).sqrt())
}

/// Trains standard PINNs on `[T_0, T_0 + horizon]` and evaluates them.
pub trait HorizonSolver {
    type Solution;

    fn solve(&mut self, horizon: f64) -> Result<Self::Solution>;

    fn values(&self, solution: &Self::Solution, points: &[(f64, f64)]) -> Result<Vec<f64>>;

    /// `m` test points in the space-time box `[x_lo, x_hi] x [0, horizon]`.
    fn test_points(&self, horizon: f64, m: usize, seed: u64) -> Vec<(f64, f64)>;
}

/// [`HorizonSolver`] backed by the trainer's first-interval path.
pub struct PinnSolver {
    pub problem: Problem,
    pub config: TrainingConfig,
}

impl HorizonSolver for PinnSolver {
    type Solution = TrainedInterval;

    fn solve(&mut self, horizon: f64) -> Result<TrainedInterval> {
        train_interval(1, None, &self.problem, (0.0, horizon), &self.config)
    }

    fn values(&self, solution: &TrainedInterval, points: &[(f64, f64)]) -> Result<Vec<f64>> {
        forward_batch(&solution.spec, &solution.params.values, points)
    }

    fn test_points(&self, horizon: f64, m: usize, seed: u64) -> Vec<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        space_time_samples(&self.problem, (0.0, horizon), m, self.config.sampling, &mut rng)
    }
}

/// One halving test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartitionRecord {
    /// Length of the longer interval.
    pub horizon: f64,
    pub discrepancy: f64,
    /// Intervals needed at length `horizon / 2`.
    pub interval_count: usize,
}

impl PartitionRecord {
    pub fn half(&self) -> f64 {
        0.5 * self.horizon
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionState {
    pub horizon: f64,
    pub d_last: f64,
    pub delta: f64,
    pub m: usize,
    pub history: Vec<PartitionRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionOutcome {
    pub interval_length: f64,
    pub interval_count: usize,
    pub history: Vec<PartitionRecord>,
    /// The search stopped at the halving limit rather than by its criteria.
    pub floor_reached: bool,
}

impl PartitionOutcome {
    /// Nodes `0, L, 2L, ...` up to `total`; the last interval may be short.
    pub fn nodes(&self, total: f64) -> Vec<f64> {
        let mut nodes: Vec<f64> = (0..self.interval_count)
            .map(|k| k as f64 * self.interval_length)
            .collect();
        nodes.push(total);
        nodes
    }
}

fn count_for(total: f64, length: f64) -> usize {
    ((total / length) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Halving search starting from `t_init`, which is also the total horizon.
pub fn adapt_partition<S: HorizonSolver>(
    solver: &mut S,
    t_init: f64,
    delta: f64,
    m: usize,
    seed: u64,
) -> Result<PartitionOutcome> {
    if !(t_init > 0.0 && t_init.is_finite()) {
        return Err(Error::Config(format!("initial horizon must be > 0 (got {t_init})")));
    }
    if !(delta > 0.0) {
        return Err(Error::Config(format!("delta must be > 0 (got {delta})")));
    }
    if m == 0 {
        return Err(Error::Config("M must be at least 1".into()));
    }
    let total = t_init;
    let mut state = PartitionState {
        horizon: t_init,
        d_last: INITIAL_D_LAST,
        delta,
        m,
        history: Vec::new(),
    };
    let wrap = |horizon: f64| move |e: Error| Error::Partition { horizon, source: Box::new(e) };
    let mut full = solver.solve(state.horizon).map_err(wrap(state.horizon))?;
    for step in 0.. {
        let half_len = 0.5 * state.horizon;
        let half = solver.solve(half_len).map_err(wrap(half_len))?;
        let pts = solver.test_points(half_len, m, derive_seed(seed, step as u64));
        let a = solver.values(&full, &pts).map_err(wrap(state.horizon))?;
        let b = solver.values(&half, &pts).map_err(wrap(half_len))?;
        let d = discrepancy(&a, &b).map_err(wrap(half_len))?;
        log::info!("T = {}: D = {d:e}", state.horizon);
        state.history.push(PartitionRecord {
            horizon: state.horizon,
            discrepancy: d,
            interval_count: count_for(total, half_len),
        });
        if !(d > delta && d <= state.d_last) {
            return Ok(PartitionOutcome {
                interval_length: half_len,
                interval_count: count_for(total, half_len),
                history: state.history,
                floor_reached: false,
            });
        }
        state.horizon = half_len;
        state.d_last = d;
        full = half;
        if step + 1 == MAX_HALVINGS {
            log::warn!("partition search stopped after {MAX_HALVINGS} halvings at T = {half_len}");
            return Ok(PartitionOutcome {
                interval_length: half_len,
                interval_count: count_for(total, half_len),
                history: state.history,
                floor_reached: true,
            });
        }
    }
    unreachable!("loop returns")
}

/// Tab-separated table: `T`, `T/2`, initial interval, `D`, interval count.
pub fn history_table(history: &[PartitionRecord]) -> String {
    let mut out = String::from("T\tT/2\tinitial_interval\tD\tintervals\n");
    for r in history {
        out.push_str(&format!(
            "{:.4}\t{:.4}\t[0,{:.4}]\t{:.4e}\t{}\n",
            r.horizon,
            r.half(),
            r.half(),
            r.discrepancy,
            r.interval_count
        ));
    }
    out
}
