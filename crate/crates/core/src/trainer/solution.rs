use serde::{Deserialize, Serialize};

use super::lbfgs::Termination;
use super::loss::{hard_field, LossTerms};
use super::objective::Precision;
use crate::diff::{evaluate_bundles, DerivativeBundle};
use crate::error::{Error, Result};
use crate::influence::InfluenceSpec;
use crate::network::{forward_batch, NetworkSpec, ParamVector};
use crate::problem::Problem;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub adam_iterations: usize,
    pub adam_final_loss: f64,
    pub lbfgs_iterations: usize,
    pub termination: Termination,
    pub restarted: bool,
    /// Weighted loss at the returned parameters, evaluated in 64-bit.
    pub final_loss: f64,
    pub terms: LossTerms,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedInterval {
    /// 1-based position in the sequence.
    pub index: usize,
    pub t_span: (f64, f64),
    pub spec: NetworkSpec,
    pub params: ParamVector,
    /// Final influence of a hard-constrained interval; `None` for the first.
    pub influence: Option<InfluenceSpec>,
    pub summary: TrainingSummary,
}

impl TrainedInterval {
    pub fn p(&self) -> Option<f64> {
        self.influence.map(|i| i.p())
    }
}

/// Piecewise solution: the first network alone on the first interval, then
/// `lambda_k * u_{k-1} + eta_k * u_k` on interval `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComposedSolution {
    pub problem: Problem,
    pub precision: Precision,
    pub t_start: f64,
    pub intervals: Vec<TrainedInterval>,
}

impl ComposedSolution {
    pub fn new(problem: Problem, precision: Precision, t_start: f64) -> Self {
        ComposedSolution {
            problem,
            precision,
            t_start,
            intervals: Vec::new(),
        }
    }

    /// Appends an interval that must start where the solution ends.
    pub fn push(&mut self, interval: TrainedInterval) -> Result<()> {
        let expected = self.intervals.len() + 1;
        if interval.index != expected {
            return Err(Error::Config(format!(
                "interval index {} appended where {expected} was expected",
                interval.index
            )));
        }
        if interval.t_span.0 != self.end() || !(interval.t_span.1 > interval.t_span.0) {
            return Err(Error::Config(format!(
                "interval [{}, {}] does not continue the solution ending at {}",
                interval.t_span.0,
                interval.t_span.1,
                self.end()
            )));
        }
        if (expected == 1) != interval.influence.is_none() {
            return Err(Error::Config(format!(
                "interval {expected} has the wrong constraint kind"
            )));
        }
        self.intervals.push(interval);
        Ok(())
    }

    pub fn end(&self) -> f64 {
        self.intervals.last().map_or(self.t_start, |i| i.t_span.1)
    }

    /// `[T_0, T_1, ..., T_n]`.
    pub fn nodes(&self) -> Vec<f64> {
        std::iter::once(self.t_start)
            .chain(self.intervals.iter().map(|i| i.t_span.1))
            .collect()
    }

    /// 0-based interval holding `t`; shared nodes belong to the left interval.
    pub fn locate(&self, t: f64) -> Result<usize> {
        if self.intervals.is_empty() || !(t >= self.t_start && t <= self.end()) {
            return Err(Error::OutOfRange(format!(
                "t = {t} outside [{}, {}]",
                self.t_start,
                self.end()
            )));
        }
        Ok(self.intervals.iter().position(|i| t <= i.t_span.1).expect("t within range"))
    }

    pub fn evaluate(&self, x: f64, t: f64) -> Result<f64> {
        Ok(self.evaluate_batch(&[(x, t)])?[0])
    }

    /// Values at many points, grouped by interval for batched forward passes.
    pub fn evaluate_batch(&self, points: &[(f64, f64)]) -> Result<Vec<f64>> {
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); self.intervals.len()];
        for (i, &(_, t)) in points.iter().enumerate() {
            groups[self.locate(t)?].push(i);
        }
        let mut out = vec![0.0; points.len()];
        for (k, idx) in groups.iter().enumerate() {
            if !idx.is_empty() {
                let pts: Vec<_> = idx.iter().map(|&i| points[i]).collect();
                for (&i, v) in idx.iter().zip(self.evaluate_on(k, &pts)?) {
                    out[i] = v;
                }
            }
        }
        Ok(out)
    }

    /// Values using interval `k`'s formula regardless of where `t` falls.
    pub fn evaluate_on(&self, k: usize, points: &[(f64, f64)]) -> Result<Vec<f64>> {
        let iv = self.interval(k)?;
        let curr = forward_batch(&iv.spec, &iv.params.values, points)?;
        let Some(inf) = iv.influence else {
            return Ok(curr);
        };
        let prev_iv = &self.intervals[k - 1];
        let prev = forward_batch(&prev_iv.spec, &prev_iv.params.values, points)?;
        points
            .iter()
            .zip(prev.iter().zip(&curr))
            .map(|(&(_, t), (&a, &b))| {
                let w = inf.bundle(t)?;
                Ok(w.lambda * a + w.eta * b)
            })
            .collect()
    }

    /// Value and derivatives using interval `k`'s formula.
    pub fn bundles_on(&self, k: usize, points: &[(f64, f64)], max_x_order: usize) -> Result<Vec<DerivativeBundle>> {
        let iv = self.interval(k)?;
        let curr = evaluate_bundles(&iv.spec, &iv.params.values, points, max_x_order)?;
        let Some(inf) = iv.influence else {
            return Ok(curr);
        };
        let prev_iv = &self.intervals[k - 1];
        let prev = evaluate_bundles(&prev_iv.spec, &prev_iv.params.values, points, max_x_order)?;
        points
            .iter()
            .zip(prev.iter().zip(&curr))
            .map(|(&(_, t), (a, b))| hard_field(a, b, &inf.bundle(t)?))
            .collect()
    }

    fn interval(&self, k: usize) -> Result<&TrainedInterval> {
        self.intervals
            .get(k)
            .ok_or_else(|| Error::OutOfRange(format!("no interval {k} (have {})", self.intervals.len())))
    }
}
