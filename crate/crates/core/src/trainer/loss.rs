use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::diff::{evaluate_bundles, network_on_tape, DerivativeBundle, JetLayout, Tape, Var, Vjp};
use crate::error::{Error, Result};
use crate::influence::{InfluenceBundle, InfluenceSpec};
use crate::network::{embed_jets, NetworkSpec};
use crate::problem::{FieldChannels, LossWeights, Problem};
use crate::real::Real;

use super::sampling::PointSets;

/// Residual points per loss part. Parts are evaluated on separate tapes and
/// reduced in order, so results do not depend on the thread count.
pub const CHUNK: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Term {
    Initial,
    Boundary,
    Residual,
}

/// Unweighted mean-square terms of a loss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub initial: f64,
    pub boundary: f64,
    pub residual: f64,
}

impl LossTerms {
    pub fn weighted(&self, w: &LossWeights) -> f64 {
        w.initial * self.initial + w.boundary * self.boundary + w.residual * self.residual
    }

    pub(crate) fn add(&mut self, term: Term, v: f64) {
        match term {
            Term::Initial => self.initial += v,
            Term::Boundary => self.boundary += v,
            Term::Residual => self.residual += v,
        }
    }
}

/// A loss split into independently recordable parts. Each part returns its
/// share of every unweighted term; shares sum to the full means.
pub trait LossModel: Sync {
    fn dim(&self) -> usize;
    fn parts(&self) -> usize;
    fn weights(&self) -> LossWeights;
    fn record<T: Real>(&self, tape: &mut Tape<T>, theta: Var, part: usize) -> Result<Vec<(Term, Var)>>;
}

/// Input jets for one batch of points, stored in 64-bit and cast per evaluation.
#[derive(Clone, Debug)]
struct Batch {
    inputs: Array2<f64>,
    points: usize,
}

impl Batch {
    fn new(spec: &NetworkSpec, pts: &[(f64, f64)], layout: JetLayout) -> Self {
        Batch {
            inputs: embed_jets(spec, pts, layout),
            points: pts.len(),
        }
    }

    fn output<T: Real>(&self, tape: &mut Tape<T>, spec: &NetworkSpec, theta: Var, layout: JetLayout) -> Var {
        let inputs = tape.constant(self.inputs.mapv(T::of));
        network_on_tape(tape, spec, theta, 0, inputs, layout, self.points)
    }
}

fn column<T: Real>(tape: &mut Tape<T>, values: &[f64]) -> Var {
    let cast: Vec<T> = values.iter().map(|&v| T::of(v)).collect();
    tape.constant_vector(&cast)
}

fn fields(tape: &mut Tape<impl Real>, out: Var, layout: JetLayout, n: usize) -> FieldChannels {
    let ch = |tape: &mut Tape<_>, c: usize| tape.channel(out, c, n);
    let u = ch(tape, 0);
    FieldChannels {
        u,
        u_x: (layout.x_order >= 1).then(|| ch(tape, 1)),
        u_xx: (layout.x_order >= 2).then(|| ch(tape, 2)),
        u_xxx: (layout.x_order >= 3).then(|| ch(tape, 3)),
        u_t: layout.t_channel().map(|c| ch(tape, c)),
    }
}

fn residual_layout(problem: &Problem) -> JetLayout {
    JetLayout::new(problem.max_x_order, true)
}

fn boundary_layout(problem: &Problem) -> JetLayout {
    let order = problem.match_orders.iter().copied().max().unwrap_or(0);
    JetLayout::new(order, false)
}

fn boundary_points(problem: &Problem, times: &[f64]) -> Vec<(f64, f64)> {
    times
        .iter()
        .map(|&t| (problem.x_lo, t))
        .chain(times.iter().map(|&t| (problem.x_hi, t)))
        .collect()
}

/// Per-order periodic mismatch columns `lo - hi` of a boundary jet.
fn mismatches<T: Real>(tape: &mut Tape<T>, out: Var, orders: &[usize], nb: usize) -> Vec<Var> {
    orders
        .iter()
        .map(|&k| {
            let lo = tape.channel(out, 2 * k, nb);
            let hi = tape.channel(out, 2 * k + 1, nb);
            tape.sub(lo, hi)
        })
        .collect()
}

fn share<T: Real>(tape: &mut Tape<T>, v: Var, of_total: usize) -> Var {
    let n = tape.value(v).len();
    let ms = tape.mean_square(v);
    tape.scale(ms, T::of(n as f64 / of_total as f64))
}

fn residual_chunks(pts: &[(f64, f64)]) -> Vec<&[(f64, f64)]> {
    pts.chunks(CHUNK).collect()
}

fn check_sets(sets: &PointSets, soft: bool) -> Result<()> {
    if sets.residual.is_empty() || sets.boundary_t.is_empty() || (soft && sets.initial_x.is_empty()) {
        return Err(Error::Config("every collocation set needs at least one point".into()));
    }
    Ok(())
}

/// Standard loss of the first interval.
#[derive(Clone, Debug)]
pub struct SoftLoss {
    problem: Problem,
    spec: NetworkSpec,
    weights: LossWeights,
    residual: Vec<Batch>,
    n_r: usize,
    boundary: Batch,
    initial: Batch,
    targets: Vec<f64>,
}

impl SoftLoss {
    pub fn new(problem: &Problem, spec: &NetworkSpec, weights: LossWeights, sets: &PointSets) -> Result<Self> {
        check_sets(sets, true)?;
        let residual = residual_chunks(&sets.residual)
            .into_iter()
            .map(|c| Batch::new(spec, c, residual_layout(problem)))
            .collect();
        let init_pts: Vec<_> = sets.initial_x.iter().map(|&x| (x, sets.initial_t)).collect();
        Ok(SoftLoss {
            problem: problem.clone(),
            spec: spec.clone(),
            weights,
            residual,
            n_r: sets.residual.len(),
            boundary: Batch::new(spec, &boundary_points(problem, &sets.boundary_t), boundary_layout(problem)),
            initial: Batch::new(spec, &init_pts, JetLayout::value_only()),
            targets: sets.initial_x.iter().map(|&x| problem.initial_condition(x)).collect(),
        })
    }
}

impl LossModel for SoftLoss {
    fn dim(&self) -> usize {
        self.spec.param_count()
    }

    fn parts(&self) -> usize {
        self.residual.len() + 1
    }

    fn weights(&self) -> LossWeights {
        self.weights
    }

    fn record<T: Real>(&self, tape: &mut Tape<T>, theta: Var, part: usize) -> Result<Vec<(Term, Var)>> {
        if part < self.residual.len() {
            let layout = residual_layout(&self.problem);
            let batch = &self.residual[part];
            let out = batch.output(tape, &self.spec, theta, layout);
            let f = fields(tape, out, layout, batch.points);
            let r = self.problem.residual_on_tape(tape, &f)?;
            return Ok(vec![(Term::Residual, share(tape, r, self.n_r))]);
        }
        let layout = boundary_layout(&self.problem);
        let out = self.boundary.output(tape, &self.spec, theta, layout);
        let nb = self.boundary.points / 2;
        let mut terms = Vec::new();
        for m in mismatches(tape, out, &self.problem.match_orders, nb) {
            terms.push((Term::Boundary, tape.mean_square(m)));
        }
        let u0 = self.initial.output(tape, &self.spec, theta, JetLayout::value_only());
        let target = column(tape, &self.targets);
        let d = tape.sub(u0, target);
        terms.push((Term::Initial, tape.mean_square(d)));
        Ok(terms)
    }
}

/// Field of the hard-constrained composition `lambda * prev + eta * curr`.
///
/// Spatial derivatives blend with the same weights because `lambda` depends
/// on `t` only; the time derivative picks up `lambda'` terms.
pub fn hard_field(prev: &DerivativeBundle, curr: &DerivativeBundle, inf: &InfluenceBundle) -> Result<DerivativeBundle> {
    let (l, e) = (inf.lambda, inf.eta);
    let mix = |a: f64, b: f64| l * a + e * b;
    let opt = |a: Option<f64>, b: Option<f64>, what: &str| match (a, b) {
        (Some(a), Some(b)) => Ok(Some(mix(a, b))),
        (None, None) => Ok(None),
        _ => Err(Error::Config(format!("{what} present on only one side of the blend"))),
    };
    Ok(DerivativeBundle {
        u: mix(prev.u, curr.u),
        u_t: inf.dlambda_dt * prev.u + l * prev.u_t + inf.deta_dt * curr.u + e * curr.u_t,
        u_x: mix(prev.u_x, curr.u_x),
        u_xx: opt(prev.u_xx, curr.u_xx, "u_xx")?,
        u_xxx: opt(prev.u_xxx, curr.u_xxx, "u_xxx")?,
    })
}

/// Influence weights as tape nodes; differentiable in `rho` when trainable.
struct InfluenceNodes {
    lambda: Var,
    dlambda_dt: Var,
}

fn influence_nodes<T: Real>(
    tape: &mut Tape<T>,
    spec: &InfluenceSpec,
    rho: Option<Var>,
    times: &[f64],
    with_rate: bool,
) -> Result<InfluenceNodes> {
    let current = match rho {
        Some(r) => spec.with_rho(tape.scalar(r).as_f64()),
        None => *spec,
    };
    let bundles: Vec<InfluenceBundle> = times.iter().map(|&t| current.bundle(t)).collect::<Result<_>>()?;
    let dp = current.dp_drho();
    let mut node = |pick: fn(&InfluenceBundle) -> f64, dpick: fn(&InfluenceBundle) -> f64| {
        let value = Array2::from_shape_fn((times.len(), 1), |(i, _)| T::of(pick(&bundles[i])));
        match rho {
            Some(r) => {
                let sens: Vec<T> = bundles.iter().map(|b| T::of(dpick(b) * dp)).collect();
                let vjp: Vjp<T> = Box::new(move |adj: &Array2<T>| {
                    let s = adj.iter().zip(&sens).fold(T::zero(), |acc, (&a, &d)| acc + a * d);
                    vec![Array2::from_elem((1, 1), s)]
                });
                tape.custom("influence", &[r], value, Some(vjp))
            }
            None => tape.constant(value),
        }
    };
    let lambda = node(|b| b.lambda, |b| b.dlambda_dp);
    let dlambda_dt = if with_rate {
        node(|b| b.dlambda_dt, |b| b.d2lambda_dtdp)
    } else {
        lambda
    };
    Ok(InfluenceNodes { lambda, dlambda_dt })
}

/// `curr + lambda * (prev - curr)`.
fn blend<T: Real>(tape: &mut Tape<T>, lambda: Var, prev: Var, curr: Var) -> Var {
    let d = tape.sub(prev, curr);
    let m = tape.mul(lambda, d);
    tape.add(curr, m)
}

#[derive(Clone, Debug)]
struct HardChunk {
    batch: Batch,
    times: Vec<f64>,
    /// Previous network's jet channels at the chunk points.
    prev: Vec<Vec<f64>>,
}

/// Loss of intervals after the first: boundary and residual terms of the
/// hard-constrained field. With a trainable `p` the parameter vector is the
/// network parameters followed by `rho`.
#[derive(Clone, Debug)]
pub struct HardLoss {
    problem: Problem,
    spec: NetworkSpec,
    weights: LossWeights,
    influence: InfluenceSpec,
    chunks: Vec<HardChunk>,
    n_r: usize,
    boundary: Batch,
    boundary_t: Vec<f64>,
    prev_mismatch: Vec<Vec<f64>>,
}

impl HardLoss {
    pub fn new(
        problem: &Problem,
        prev_spec: &NetworkSpec,
        prev_params: &[f64],
        spec: &NetworkSpec,
        influence: &InfluenceSpec,
        weights: LossWeights,
        sets: &PointSets,
    ) -> Result<Self> {
        check_sets(sets, false)?;
        influence.validate()?;
        let layout = residual_layout(problem);
        let mut chunks = Vec::new();
        for c in residual_chunks(&sets.residual) {
            let bundles = evaluate_bundles(prev_spec, prev_params, c, problem.max_x_order)?;
            let mut prev: Vec<Vec<f64>> = (0..=problem.max_x_order)
                .map(|k| bundles.iter().map(|b| b.x_derivative(k).unwrap_or(0.0)).collect())
                .collect();
            prev.push(bundles.iter().map(|b| b.u_t).collect());
            chunks.push(HardChunk {
                batch: Batch::new(spec, c, layout),
                times: c.iter().map(|p| p.1).collect(),
                prev,
            });
        }
        let bpts = boundary_points(problem, &sets.boundary_t);
        let nb = sets.boundary_t.len();
        let order = boundary_layout(problem).x_order.max(1);
        let pb = evaluate_bundles(prev_spec, prev_params, &bpts, order)?;
        let prev_mismatch = problem
            .match_orders
            .iter()
            .map(|&k| {
                (0..nb)
                    .map(|i| pb[i].x_derivative(k).unwrap_or(0.0) - pb[nb + i].x_derivative(k).unwrap_or(0.0))
                    .collect()
            })
            .collect();
        Ok(HardLoss {
            problem: problem.clone(),
            spec: spec.clone(),
            weights,
            influence: *influence,
            chunks,
            n_r: sets.residual.len(),
            boundary: Batch::new(spec, &bpts, boundary_layout(problem)),
            boundary_t: sets.boundary_t.clone(),
            prev_mismatch,
        })
    }

    pub fn influence(&self) -> &InfluenceSpec {
        &self.influence
    }

    fn rho<T: Real>(&self, tape: &mut Tape<T>, theta: Var) -> Option<Var> {
        self.influence
            .is_trainable()
            .then(|| tape.view(theta, self.spec.param_count(), 1, 1))
    }
}

impl LossModel for HardLoss {
    fn dim(&self) -> usize {
        self.spec.param_count() + usize::from(self.influence.is_trainable())
    }

    fn parts(&self) -> usize {
        self.chunks.len() + 1
    }

    fn weights(&self) -> LossWeights {
        self.weights
    }

    fn record<T: Real>(&self, tape: &mut Tape<T>, theta: Var, part: usize) -> Result<Vec<(Term, Var)>> {
        let rho = self.rho(tape, theta);
        if let Some(chunk) = self.chunks.get(part) {
            let layout = residual_layout(&self.problem);
            let n = chunk.batch.points;
            let out = chunk.batch.output(tape, &self.spec, theta, layout);
            let curr = fields(tape, out, layout, n);
            let inf = influence_nodes(tape, &self.influence, rho, &chunk.times, true)?;
            let prev: Vec<Var> = chunk.prev.iter().map(|c| column(tape, c)).collect();
            let t_idx = prev.len() - 1;
            let mut x = |k: usize, c: Option<Var>| c.map(|c| blend(tape, inf.lambda, prev[k], c));
            let u_x = x(1, curr.u_x);
            let u_xx = x(2, curr.u_xx);
            let u_xxx = x(3, curr.u_xxx);
            let u = blend(tape, inf.lambda, prev[0], curr.u);
            // u_t of the blend: blend of u_t plus lambda' (prev - curr)
            let curr_t = curr.u_t.expect("residual layout carries u_t");
            let slope = blend(tape, inf.lambda, prev[t_idx], curr_t);
            let gap = tape.sub(prev[0], curr.u);
            let rate = tape.mul(inf.dlambda_dt, gap);
            let u_t = tape.add(slope, rate);
            let f = FieldChannels {
                u,
                u_t: Some(u_t),
                u_x,
                u_xx,
                u_xxx,
            };
            let r = self.problem.residual_on_tape(tape, &f)?;
            return Ok(vec![(Term::Residual, share(tape, r, self.n_r))]);
        }
        let layout = boundary_layout(&self.problem);
        let out = self.boundary.output(tape, &self.spec, theta, layout);
        let nb = self.boundary_t.len();
        let inf = influence_nodes(tape, &self.influence, rho, &self.boundary_t, false)?;
        let mut terms = Vec::new();
        for (m, prev) in mismatches(tape, out, &self.problem.match_orders, nb)
            .into_iter()
            .zip(&self.prev_mismatch)
        {
            let prev = column(tape, prev);
            let h = blend(tape, inf.lambda, prev, m);
            terms.push((Term::Boundary, tape.mean_square(h)));
        }
        Ok(terms)
    }
}
