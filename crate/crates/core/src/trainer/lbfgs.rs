use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::objective::Objective;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LbfgsConfig {
    pub history: usize,
    pub max_iters: usize,
    pub c1: f64,
    pub c2: f64,
    pub grad_tol: f64,
    pub loss_rel_tol: f64,
    /// Function evaluations allowed per line search.
    pub max_evals: usize,
    /// Multiplier on the first trial step of every line search.
    pub initial_step: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            history: 50,
            max_iters: 30000,
            c1: 1e-4,
            c2: 0.9,
            grad_tol: 1e-8,
            loss_rel_tol: 1e-11,
            max_evals: 25,
            initial_step: 1.0,
        }
    }
}

impl LbfgsConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.history >= 1
            && 0.0 < self.c1
            && self.c1 < self.c2
            && self.c2 < 1.0
            && self.grad_tol > 0.0
            && self.loss_rel_tol > 0.0
            && self.max_evals >= 2
            && self.initial_step > 0.0;
        if !ok {
            return Err(Error::Config(format!("invalid l-bfgs settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradTol,
    LossRelTol,
    MaxIters,
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct LbfgsResult {
    pub params: Vec<f64>,
    pub loss: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// Loss after every accepted step, starting with the initial loss.
    pub trace: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(x: &[f64], a: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(x, d)| x + a * d).collect()
}

struct Point {
    alpha: f64,
    f: f64,
    g: Vec<f64>,
    dg: f64,
}

/// Minimizer of the cubic matching values and slopes at `a` and `b`, kept
/// safely inside the bracket; bisection when the cubic is unusable.
fn cubic_min(a: &Point, b: &Point) -> f64 {
    let (lo, hi) = if a.alpha < b.alpha { (a.alpha, b.alpha) } else { (b.alpha, a.alpha) };
    let d1 = a.dg + b.dg - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.dg * b.dg;
    let mid = 0.5 * (lo + hi);
    if !(disc >= 0.0) {
        return mid;
    }
    let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
    let t = b.alpha - (b.alpha - a.alpha) * (b.dg + d2 - d1) / (b.dg - a.dg + 2.0 * d2);
    let margin = 0.1 * (hi - lo);
    if t.is_finite() && t > lo + margin && t < hi - margin {
        t
    } else {
        mid
    }
}

/// Strong-Wolfe line search with cubic-interpolation zoom. Returns `None`
/// when no acceptable step was found within the evaluation budget.
fn line_search(
    obj: &impl Objective,
    x: &[f64],
    f0: f64,
    g0: &[f64],
    d: &[f64],
    alpha0: f64,
    cfg: &LbfgsConfig,
) -> Result<Option<(Vec<f64>, Point)>> {
    let dg0 = dot(g0, d);
    let origin = Point {
        alpha: 0.0,
        f: f0,
        g: g0.to_vec(),
        dg: dg0,
    };
    let evals = std::cell::Cell::new(0);
    let probe = |alpha: f64| -> Result<(Vec<f64>, Point)> {
        evals.set(evals.get() + 1);
        let xn = axpy(x, alpha, d);
        let (f, g) = obj.eval(&xn)?;
        let dg = dot(&g, d);
        Ok((xn, Point { alpha, f, g, dg }))
    };
    let finite = |p: &Point| p.f.is_finite() && p.dg.is_finite();
    let armijo = |p: &Point| p.f <= f0 + cfg.c1 * p.alpha * dg0;
    let curvature = |p: &Point| p.dg.abs() <= -cfg.c2 * dg0;

    let mut prev = origin;
    let mut alpha = alpha0;
    let (mut lo, mut hi);
    loop {
        let (xn, p) = probe(alpha)?;
        if !finite(&p) {
            // step overshot into a non-finite region; shrink and retry
            if evals.get() >= cfg.max_evals {
                return Ok(None);
            }
            alpha = 0.5 * (prev.alpha + alpha);
            continue;
        }
        if !armijo(&p) || (prev.alpha > 0.0 && p.f >= prev.f) {
            lo = prev;
            hi = p;
            break;
        }
        if curvature(&p) {
            return Ok(Some((xn, p)));
        }
        if p.dg >= 0.0 {
            lo = p;
            hi = prev;
            break;
        }
        if evals.get() >= cfg.max_evals {
            return Ok(None);
        }
        alpha = 2.0 * p.alpha;
        prev = p;
    }
    while evals.get() < cfg.max_evals {
        let a = cubic_min(&lo, &hi);
        let (xn, p) = probe(a)?;
        if !finite(&p) || !armijo(&p) || p.f >= lo.f {
            hi = p;
        } else {
            if curvature(&p) {
                return Ok(Some((xn, p)));
            }
            if p.dg * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = p;
        }
        if (hi.alpha - lo.alpha).abs() <= 1e-16 * lo.alpha.abs().max(1.0) {
            break;
        }
    }
    Ok(None)
}

/// Limited-memory BFGS with a strong-Wolfe line search.
///
/// A line-search failure on the first iteration is an error; later failures
/// end the run with [`Termination::LineSearchFailed`] and keep the last
/// accepted point.
pub fn run_lbfgs(obj: &impl Objective, params: &[f64], cfg: &LbfgsConfig) -> Result<LbfgsResult> {
    cfg.validate()?;
    let mut x = params.to_vec();
    let (mut f, mut g) = obj.eval(&x)?;
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { iteration: 0, loss: f });
    }
    let mut trace = vec![f];
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.history);
    let mut iterations = 0;
    let termination = loop {
        if norm(&g) <= cfg.grad_tol {
            break Termination::GradTol;
        }
        if iterations >= cfg.max_iters {
            break Termination::MaxIters;
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        let gamma = hist.back().map_or(1.0, |(s, y, _)| dot(s, y) / dot(y, y));
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        let mut d: Vec<f64> = q.iter().map(|v| -v).collect();
        if dot(&d, &g) >= 0.0 {
            // lost descent; fall back to steepest descent
            hist.clear();
            d = g.iter().map(|v| -v).collect();
        }
        let alpha0 = cfg.initial_step
            * if hist.is_empty() {
                (1.0 / norm(&g)).min(1.0)
            } else {
                1.0
            };
        let Some((xn, p)) = line_search(obj, &x, f, &g, &d, alpha0, cfg)? else {
            if iterations == 0 {
                return Err(Error::Optimizer("line search failed on the first l-bfgs iteration".into()));
            }
            break Termination::LineSearchFailed;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = p.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if hist.len() == cfg.history {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        let f_old = f;
        x = xn;
        f = p.f;
        g = p.g;
        iterations += 1;
        trace.push(f);
        if iterations % 500 == 0 {
            log::debug!("l-bfgs {iterations}: loss {f:.6e}");
        }
        let scale = f_old.abs().max(f.abs()).max(f64::MIN_POSITIVE);
        if (f_old - f) / scale <= cfg.loss_rel_tol {
            break Termination::LossRelTol;
        }
    };
    Ok(LbfgsResult {
        grad_norm: norm(&g),
        params: x,
        loss: f,
        iterations,
        termination,
        trace,
    })
}
