//! Error norms, solution dumps and node continuity checks for composed
//! solutions.

use std::fmt::Write as _;
use std::hash::Hasher;
use std::io::Write as _;
use std::path::Path;

use fnv::FnvHasher;

use crate::diff::DerivativeBundle;
use crate::error::{Error, Result};
use crate::oracle::ReferenceGrid;
use crate::trainer::ComposedSolution;

pub const DEFAULT_GRID: (usize, usize) = (256, 201);

/// Piecewise value at `(x, t)`; shared nodes use the left interval.
pub fn evaluate_composed(solution: &ComposedSolution, x: f64, t: f64) -> Result<f64> {
    solution.evaluate(x, t)
}

/// Ground truth for error reports.
pub enum Truth<'a> {
    /// Closed-form solution of the solution's own problem.
    Exact,
    Grid(&'a ReferenceGrid),
    Function(&'a dyn Fn(f64, f64) -> f64),
}

impl Truth<'_> {
    fn describe(&self) -> String {
        match self {
            Truth::Exact => "exact".into(),
            Truth::Grid(g) => format!("grid {}x{} over t in [{}, {}]", g.nx(), g.nt(), g.t_lo, g.t_hi),
            Truth::Function(_) => "function".into(),
        }
    }

    fn values(&self, solution: &ComposedSolution, points: &[(f64, f64)]) -> Result<Vec<f64>> {
        match self {
            Truth::Exact => points
                .iter()
                .map(|&(x, t)| solution.problem.exact_solution(x, t))
                .collect(),
            Truth::Grid(g) => {
                let (lo, hi) = (solution.t_start, solution.end());
                let slack = 1e-12 * (1.0 + hi.abs());
                if g.t_lo > lo + slack || g.t_hi < hi - slack {
                    return Err(Error::Coverage(format!(
                        "reference spans t in [{}, {}] but the solution needs [{lo}, {hi}]",
                        g.t_lo, g.t_hi
                    )));
                }
                if (g.x_lo - solution.problem.x_lo).abs() > 1e-12 || (g.x_hi - solution.problem.x_hi).abs() > 1e-12 {
                    return Err(Error::Coverage(format!(
                        "reference spans x in [{}, {}] but the problem lives on [{}, {}]",
                        g.x_lo, g.x_hi, solution.problem.x_lo, solution.problem.x_hi
                    )));
                }
                points
                    .iter()
                    .map(|&(x, t)| g.interpolate(x, t.clamp(g.t_lo, g.t_hi)))
                    .collect()
            }
            Truth::Function(f) => Ok(points.iter().map(|&(x, t)| f(x, t)).collect()),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Norms {
    pub l2_rel: f64,
    pub l1: f64,
    pub linf: f64,
}

/// Relative L2, mean absolute and maximum absolute error.
pub fn error_norms(pred: &[f64], truth: &[f64]) -> Result<Norms> {
    if pred.is_empty() || pred.len() != truth.len() {
        return Err(Error::Config(format!(
            "norms need equal non-empty samples (got {} and {})",
            pred.len(),
            truth.len()
        )));
    }
    let (mut sq, mut den, mut abs, mut max) = (0.0, 0.0, 0.0, 0.0f64);
    for (p, u) in pred.iter().zip(truth) {
        let e = p - u;
        sq += e * e;
        den += u * u;
        abs += e.abs();
        max = max.max(e.abs());
    }
    if !(den > 0.0) {
        return Err(Error::Degenerate("reference values vanish on every sample".into()));
    }
    Ok(Norms {
        l2_rel: (sq / den).sqrt(),
        l1: abs / pred.len() as f64,
        linf: max,
    })
}

/// Uniform `nx x nt` sample grid; both ends are included in each direction.
pub fn sample_grid(solution: &ComposedSolution, grid: (usize, usize)) -> Result<Vec<(f64, f64)>> {
    let (nx, nt) = grid;
    if nx < 2 || nt < 2 {
        return Err(Error::Config(format!("evaluation grid needs at least 2x2 samples (got {nx}x{nt})")));
    }
    if solution.intervals.is_empty() {
        return Err(Error::Config("solution has no trained intervals".into()));
    }
    let p = &solution.problem;
    let (t0, t1) = (solution.t_start, solution.end());
    let mut pts = Vec::with_capacity(nx * nt);
    for j in 0..nt {
        let t = if j + 1 == nt { t1 } else { t0 + (t1 - t0) * j as f64 / (nt - 1) as f64 };
        for i in 0..nx {
            let x = if i + 1 == nx { p.x_hi } else { p.x_lo + p.period() * i as f64 / (nx - 1) as f64 };
            pts.push((x, t));
        }
    }
    Ok(pts)
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntervalError {
    pub index: usize,
    pub samples: usize,
    pub norms: Norms,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub norms: Norms,
    pub samples: usize,
    pub grid: (usize, usize),
    pub truth: String,
    pub per_interval: Vec<IntervalError>,
    /// FNV-1a hash of the solution, grid and truth description.
    pub hash: u64,
    /// Caller-supplied entries (seeds, timings), appended after the hash.
    pub metadata: Vec<(String, String)>,
}

/// Hash of everything that determines a solution's values.
pub fn solution_hash(solution: &ComposedSolution) -> u64 {
    let mut h = FnvHasher::default();
    h.write(solution.problem.name().as_bytes());
    h.write(&solution.t_start.to_le_bytes());
    for iv in &solution.intervals {
        h.write(&iv.t_span.0.to_le_bytes());
        h.write(&iv.t_span.1.to_le_bytes());
        h.write(format!("{:?}", iv.spec).as_bytes());
        for v in &iv.params.values {
            h.write(&v.to_le_bytes());
        }
        if let Some(inf) = iv.influence {
            h.write(&inf.p().to_le_bytes());
        }
    }
    h.finish()
}

pub fn error_report(solution: &ComposedSolution, truth: &Truth, grid: (usize, usize)) -> Result<ErrorReport> {
    let pts = sample_grid(solution, grid)?;
    let pred = solution.evaluate_batch(&pts)?;
    let exact = truth.values(solution, &pts)?;
    let norms = error_norms(&pred, &exact)?;
    let mut per_interval = Vec::new();
    let mut owner = Vec::with_capacity(pts.len());
    for &(_, t) in &pts {
        owner.push(solution.locate(t)?);
    }
    for iv in 0..solution.intervals.len() {
        let (p, e): (Vec<f64>, Vec<f64>) = owner
            .iter()
            .zip(pred.iter().zip(&exact))
            .filter(|(&k, _)| k == iv)
            .map(|(_, (&p, &e))| (p, e))
            .unzip();
        if p.is_empty() {
            continue;
        }
        per_interval.push(IntervalError {
            index: iv + 1,
            samples: p.len(),
            norms: error_norms(&p, &e)?,
        });
    }
    let description = truth.describe();
    let mut h = FnvHasher::default();
    h.write(&solution_hash(solution).to_le_bytes());
    h.write(&(grid.0 as u64).to_le_bytes());
    h.write(&(grid.1 as u64).to_le_bytes());
    h.write(description.as_bytes());
    Ok(ErrorReport {
        norms,
        samples: pts.len(),
        grid,
        truth: description,
        per_interval,
        hash: h.finish(),
        metadata: Vec::new(),
    })
}

impl ErrorReport {
    /// `key: value` lines in a fixed order.
    pub fn to_summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "l2_rel: {:e}", self.norms.l2_rel);
        let _ = writeln!(s, "l1: {:e}", self.norms.l1);
        let _ = writeln!(s, "linf: {:e}", self.norms.linf);
        let _ = writeln!(s, "samples: {}", self.samples);
        let _ = writeln!(s, "grid: {}x{}", self.grid.0, self.grid.1);
        let _ = writeln!(s, "truth: {}", self.truth);
        for iv in &self.per_interval {
            let _ = writeln!(
                s,
                "interval_{}: l2_rel={:e} l1={:e} linf={:e} samples={}",
                iv.index, iv.norms.l2_rel, iv.norms.l1, iv.norms.linf, iv.samples
            );
        }
        let _ = writeln!(s, "hash: {:016x}", self.hash);
        for (k, v) in &self.metadata {
            let _ = writeln!(s, "{k}: {v}");
        }
        s
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Path of the summary written next to `csv`.
pub fn summary_path(csv: &Path) -> std::path::PathBuf {
    csv.with_extension("summary")
}

/// Writes `x,t,u_pred[,u_ref,abs_err]` rows to `path` and a `key: value`
/// summary next to it. Returns the report when a truth is given.
pub fn emit_solution_grid(
    solution: &ComposedSolution,
    truth: Option<&Truth>,
    grid: (usize, usize),
    path: &Path,
) -> Result<Option<ErrorReport>> {
    let pts = sample_grid(solution, grid)?;
    let pred = solution.evaluate_batch(&pts)?;
    let exact = truth.map(|t| t.values(solution, &pts)).transpose()?;
    let mut csv = String::with_capacity(pts.len() * 48);
    csv.push_str(if exact.is_some() { "x,t,u_pred,u_ref,abs_err\n" } else { "x,t,u_pred\n" });
    for (i, (&(x, t), &u)) in pts.iter().zip(&pred).enumerate() {
        let _ = write!(csv, "{x},{t},{u}");
        if let Some(e) = &exact {
            let _ = write!(csv, ",{},{}", e[i], (u - e[i]).abs());
        }
        csv.push('\n');
    }
    write_file(path, &csv)?;

    let report = truth.map(|t| error_report(solution, t, grid)).transpose()?;
    let mut s = String::new();
    let _ = writeln!(s, "problem: {}", solution.problem.name());
    let _ = writeln!(s, "intervals: {}", solution.intervals.len());
    let nodes: Vec<String> = solution.nodes().iter().map(|v| v.to_string()).collect();
    let _ = writeln!(s, "nodes: {}", nodes.join(","));
    let ps: Vec<String> = solution
        .intervals
        .iter()
        .map(|iv| iv.p().map_or("-".into(), |p| p.to_string()))
        .collect();
    let _ = writeln!(s, "p: {}", ps.join(","));
    if let Some(r) = &report {
        s.push_str(&r.to_summary());
    } else {
        let _ = writeln!(s, "samples: {}", pts.len());
        let _ = writeln!(s, "grid: {}x{}", grid.0, grid.1);
    }
    write_file(&summary_path(path), &s)?;
    Ok(report)
}

/// One-sided disagreement at an interior node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeJump {
    pub node: f64,
    pub du: f64,
    pub du_t: f64,
}

/// Jumps at each interior node, where `bundles(k, points)` evaluates interval
/// `k`'s formula (0-based) with `u_t`.
pub fn node_jumps(
    nodes: &[f64],
    xs: &[f64],
    bundles: impl Fn(usize, &[(f64, f64)]) -> Result<Vec<DerivativeBundle>>,
) -> Result<Vec<NodeJump>> {
    let mut out = Vec::new();
    for k in 1..nodes.len().saturating_sub(1) {
        let t = nodes[k];
        let pts: Vec<(f64, f64)> = xs.iter().map(|&x| (x, t)).collect();
        let left = bundles(k - 1, &pts)?;
        let right = bundles(k, &pts)?;
        let mut jump = NodeJump { node: t, du: 0.0, du_t: 0.0 };
        for (l, r) in left.iter().zip(&right) {
            jump.du = jump.du.max((l.u - r.u).abs());
            jump.du_t = jump.du_t.max((l.u_t - r.u_t).abs());
        }
        out.push(jump);
    }
    Ok(out)
}

/// Jumps in `u` and `u_t` across every interior node over `nx_samples`
/// equispaced `x`.
pub fn node_smoothness_check(solution: &ComposedSolution, nx_samples: usize) -> Result<Vec<NodeJump>> {
    let p = &solution.problem;
    let n = nx_samples.max(2);
    let xs: Vec<f64> = (0..n).map(|i| p.x_lo + p.period() * i as f64 / (n - 1) as f64).collect();
    node_jumps(&solution.nodes(), &xs, |k, pts| solution.bundles_on(k, pts, 1))
}

/// Largest `(|du|, |du_t|)` over all nodes; zeros when there are none.
pub fn worst_jump(jumps: &[NodeJump]) -> (f64, f64) {
    jumps
        .iter()
        .fold((0.0, 0.0), |(a, b), j| (a.max(j.du), b.max(j.du_t)))
}
