//! Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.
//!
//! Training criteria run at a reduced budget by default (see `Budget`); set
//! `SEQPINN_ACCEPTANCE=full` for the library's default training settings.
//! Each training criterion may use up to three seeds and passes if any does.

use std::time::Instant;

use seqpinn::diff::evaluate_bundle;
use seqpinn::evaluation::{error_report, node_smoothness_check, worst_jump, Truth, DEFAULT_GRID};
use seqpinn::influence::{verify_conditions, Family, InfluenceSpec, DEFAULT_EPSILON};
use seqpinn::network::{forward, init_network, Embedding, NetworkSpec};
use seqpinn::oracle::{frame_masses, solve_spectral, ReferenceGrid, SpectralConfig};
use seqpinn::partition::{adapt_partition, HorizonSolver, PartitionOutcome};
use seqpinn::problem::{Problem, ProblemKind};
use seqpinn::trainer::*;
use seqpinn::Result;

const SEEDS: [u64; 3] = [0, 1, 2];

// Oracle resolution for reference grids and the refined comparison.
const ORACLE: (usize, f64) = (512, 1e-5);
const REFINED: (usize, f64) = (1024, 5e-6);

struct Budget {
    label: &'static str,
    n_initial: usize,
    n_boundary: usize,
    n_residual: usize,
    adam: usize,
    lbfgs: usize,
}

fn budget() -> Budget {
    if std::env::var("SEQPINN_ACCEPTANCE").as_deref() == Ok("full") {
        let d = TrainingConfig::for_problem(&Problem::new(ProblemKind::Convection));
        Budget {
            label: "full",
            n_initial: d.n_initial,
            n_boundary: d.n_boundary,
            n_residual: d.n_residual,
            adam: d.adam.iters,
            lbfgs: d.lbfgs.max_iters,
        }
    } else {
        Budget {
            label: "reduced",
            n_initial: 256,
            n_boundary: 256,
            n_residual: 2000,
            adam: 1000,
            lbfgs: 2000,
        }
    }
}

fn config(problem: &Problem, b: &Budget, seed: u64, p_choice: PChoice) -> TrainingConfig {
    let mut c = TrainingConfig::for_problem(problem);
    c.n_initial = b.n_initial;
    c.n_boundary = b.n_boundary;
    c.n_residual = b.n_residual;
    c.adam.iters = b.adam;
    c.lbfgs.max_iters = b.lbfgs;
    c.seed = seed;
    c.p_choice = p_choice;
    c
}

struct Line {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn report(lines: &mut Vec<Line>, id: usize, name: &'static str, pass: bool, detail: String) {
    eprintln!("  criterion {id}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    lines.push(Line { id, name, pass, detail });
}

fn l2(solution: &ComposedSolution, truth: &Truth) -> Result<f64> {
    Ok(error_report(solution, truth, DEFAULT_GRID)?.norms.l2_rel)
}

fn uniform(total: f64, count: usize) -> Vec<f64> {
    (0..=count)
        .map(|k| if k == count { total } else { total * k as f64 / count as f64 })
        .collect()
}

/// Trains `first` once, then continues it separately with each `p` choice.
fn branches(
    problem: &Problem,
    nodes: &[f64],
    budget: &Budget,
    seed: u64,
    choices: &[PChoice],
) -> Result<Vec<ComposedSolution>> {
    let base = config(problem, budget, seed, PChoice::Trainable);
    let first = train_interval(1, None, problem, (nodes[0], nodes[1]), &base)?;
    let mut out = Vec::new();
    for &choice in choices {
        let mut sol = ComposedSolution::new(problem.clone(), Precision::F64, nodes[0]);
        sol.push(first.clone())?;
        let c = config(problem, budget, seed, choice);
        for &t in &nodes[2..] {
            extend(&mut sol, t, &c)?;
        }
        out.push(sol);
    }
    Ok(out)
}

fn ps(sol: &ComposedSolution) -> String {
    let v: Vec<String> = sol.intervals.iter().filter_map(|iv| iv.p()).map(|p| format!("{p:.4}")).collect();
    format!("[{}]", v.join(", "))
}

/// Multi-interval solutions trained along the way, for the node checks.
#[derive(Default)]
struct Trained {
    solutions: Vec<(String, ComposedSolution)>,
}

impl Trained {
    fn keep(&mut self, label: String, sol: &ComposedSolution) {
        if sol.intervals.len() > 1 {
            self.solutions.push((label, sol.clone()));
        }
    }
}

fn convection_pair(lines: &mut Vec<Line>, b: &Budget, kept: &mut Trained) {
    let problem = Problem::new(ProblemKind::Convection);
    let nodes = [0.0, 1.0, 2.0];
    let start = Instant::now();
    let mut tried = Vec::new();
    let (mut c1, mut c2) = (None::<String>, None::<String>);
    for seed in SEEDS {
        let sols = match branches(&problem, &nodes, b, seed, &[PChoice::Trainable, PChoice::Right]) {
            Ok(s) => s,
            Err(e) => {
                tried.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        let (thc, fhc) = (&sols[0], &sols[1]);
        kept.keep(format!("convection T=2 THC seed {seed}"), thc);
        kept.keep(format!("convection T=2 FHC seed {seed}"), fhc);
        let (Ok(e_thc), Ok(e_fhc)) = (l2(thc, &Truth::Exact), l2(fhc, &Truth::Exact)) else {
            tried.push(format!("seed {seed}: evaluation failed"));
            continue;
        };
        let p = thc.intervals[1].p().unwrap();
        let msg = format!("seed {seed}: THC l2 {e_thc:.4e} p {p:.4}, FHC(p=2) l2 {e_fhc:.4e}, ratio {:.1}", e_fhc / e_thc);
        eprintln!("  {msg}");
        if c1.is_none() && e_thc <= 5e-3 && p > 1.0 && p <= 1.5 {
            c1 = Some(msg.clone());
        }
        if c2.is_none() && e_fhc >= 10.0 * e_thc {
            c2 = Some(msg.clone());
        }
        tried.push(msg);
        if c1.is_some() && c2.is_some() {
            break;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let all = tried.join("; ");
    report(
        lines,
        1,
        "convection T=2, 2 intervals, THC: l2 <= 5e-3, p in (1, 1.5]",
        c1.is_some(),
        c1.unwrap_or_else(|| format!("{all}; {elapsed:.0}s")),
    );
    report(
        lines,
        2,
        "convection T=2, FHC p=2: l2 >= 10x THC",
        c2.is_some(),
        c2.unwrap_or_else(|| format!("{all}; {elapsed:.0}s")),
    );
}

/// Tries seeds until `accept(l2)` holds.
fn seeded(
    lines: &mut Vec<Line>,
    id: usize,
    name: &'static str,
    problem: &Problem,
    nodes: &[f64],
    b: &Budget,
    kept: &mut Trained,
    accept: impl Fn(f64) -> bool,
) {
    let start = Instant::now();
    let mut tried = Vec::new();
    for seed in SEEDS {
        let c = config(problem, b, seed, PChoice::Trainable);
        let msg = match train_sequence(problem, nodes, &c).and_then(|s| Ok((l2(&s, &Truth::Exact)?, s))) {
            Ok((e, sol)) => {
                kept.keep(format!("{name} seed {seed}"), &sol);
                let msg = format!("seed {seed}: l2 {e:.4e}");
                eprintln!("  {msg}");
                if accept(e) {
                    report(lines, id, name, true, msg);
                    return;
                }
                msg
            }
            Err(e) => format!("seed {seed}: {e}"),
        };
        tried.push(msg);
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(lines, id, name, false, format!("{}; {elapsed:.0}s", tried.join("; ")));
}

fn allen_cahn_pair(lines: &mut Vec<Line>, b: &Budget, grid: &ReferenceGrid, kept: &mut Trained) {
    let problem = Problem::new(ProblemKind::AllenCahn);
    let nodes = uniform(1.0, 4);
    let truth = Truth::Grid(grid);
    let mut tried = Vec::new();
    let (mut c5, mut c6) = (None::<String>, None::<String>);
    for seed in SEEDS {
        let sols = match branches(&problem, &nodes, b, seed, &[PChoice::Trainable, PChoice::Right]) {
            Ok(s) => s,
            Err(e) => {
                tried.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        let (thc, fhc) = (&sols[0], &sols[1]);
        kept.keep(format!("allen-cahn THC seed {seed}"), thc);
        kept.keep(format!("allen-cahn FHC seed {seed}"), fhc);
        let (Ok(e_thc), Ok(e_fhc)) = (l2(thc, &truth), l2(fhc, &truth)) else {
            tried.push(format!("seed {seed}: evaluation failed"));
            continue;
        };
        let upper = thc.intervals[1..].iter().all(|iv| {
            let (a, z) = iv.t_span;
            iv.p().unwrap() >= 0.5 * (a + z)
        });
        let msg = format!("seed {seed}: THC l2 {e_thc:.4e} p {}, FHC(right) l2 {e_fhc:.4e}", ps(thc));
        eprintln!("  {msg}");
        if c5.is_none() && e_thc <= 2e-2 && upper {
            c5 = Some(msg.clone());
        }
        if c6.is_none() && e_fhc <= 3.0 * e_thc && e_thc <= 3.0 * e_fhc {
            c6 = Some(msg.clone());
        }
        tried.push(msg);
        if c5.is_some() && c6.is_some() {
            break;
        }
    }
    let all = tried.join("; ");
    report(
        lines,
        5,
        "allen-cahn T=1, 4 intervals, THC: l2 <= 2e-2, p in upper halves",
        c5.is_some(),
        c5.unwrap_or_else(|| all.clone()),
    );
    report(lines, 6, "allen-cahn FHC p=right: l2 within 3x of THC", c6.is_some(), c6.unwrap_or(all));
}

fn kdv_pair(lines: &mut Vec<Line>, b: &Budget, grid: &ReferenceGrid, kept: &mut Trained) {
    let problem = Problem::new(ProblemKind::Kdv);
    let nodes = uniform(1.0, 4);
    let truth = Truth::Grid(grid);
    let mut tried = Vec::new();
    for seed in SEEDS {
        let sols = match branches(&problem, &nodes, b, seed, &[PChoice::Trainable, PChoice::Midpoint]) {
            Ok(s) => s,
            Err(e) => {
                tried.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        let (thc, fhc) = (&sols[0], &sols[1]);
        kept.keep(format!("kdv THC seed {seed}"), thc);
        kept.keep(format!("kdv FHC seed {seed}"), fhc);
        let (Ok(e_thc), Ok(e_fhc)) = (l2(thc, &truth), l2(fhc, &truth)) else {
            tried.push(format!("seed {seed}: evaluation failed"));
            continue;
        };
        let msg = format!("seed {seed}: THC l2 {e_thc:.4e} p {}, FHC(midpoint) l2 {e_fhc:.4e}", ps(thc));
        eprintln!("  {msg}");
        if e_thc <= 3e-2 && e_thc <= e_fhc {
            report(lines, 7, "kdv T=1, 4 intervals, THC: l2 <= 3e-2 and <= FHC(midpoint)", true, msg);
            return;
        }
        tried.push(msg);
    }
    report(
        lines,
        7,
        "kdv T=1, 4 intervals, THC: l2 <= 3e-2 and <= FHC(midpoint)",
        false,
        tried.join("; "),
    );
}

/// Constant solutions scaled so consecutive halvings give the scripted discrepancies.
struct Scripted {
    t_init: f64,
    scales: Vec<f64>,
}

impl Scripted {
    fn new(t_init: f64, ds: &[f64]) -> Self {
        let mut scales = vec![1.0];
        for d in ds {
            let last = *scales.last().unwrap();
            scales.push(last / (1.0 + d));
        }
        Scripted { t_init, scales }
    }
}

impl HorizonSolver for Scripted {
    type Solution = f64;

    fn solve(&mut self, horizon: f64) -> Result<f64> {
        Ok(self.scales[(self.t_init / horizon).log2().round() as usize])
    }

    fn values(&self, s: &f64, points: &[(f64, f64)]) -> Result<Vec<f64>> {
        Ok(points.iter().map(|&(x, t)| s * (2.0 + (x + t).sin())).collect())
    }

    fn test_points(&self, horizon: f64, m: usize, _seed: u64) -> Vec<(f64, f64)> {
        (0..m).map(|i| (0.1 * i as f64, horizon * i as f64 / m as f64)).collect()
    }
}

fn partition_decisions(lines: &mut Vec<Line>) {
    let run = |t: f64, ds: &[f64], delta: f64| -> PartitionOutcome {
        adapt_partition(&mut Scripted::new(t, ds), t, delta, 64, 0).unwrap()
    };
    let conv = [9.9493e-1, 1.5895e-3, 8.0895e-4, 3.9079e-4];
    let ac = [1.8612e-2, 1.2713e-3, 6.4375e-4, 7.0378e-4];
    let kdv = [3.3025e-2, 5.4692e-3, 2.2238e-3, 1.3416e-3];
    let cases = [
        ("convection d=1e-3", run(5.0, &conv, 1e-3), 8, 3),
        ("convection d=1e-2", run(5.0, &conv, 1e-2), 4, 2),
        ("allen-cahn d=1e-2", run(1.0, &ac, 1e-2), 4, 2),
        ("allen-cahn d=1e-3", run(1.0, &ac, 1e-3), 8, 3),
        ("kdv d=5e-3", run(1.0, &kdv, 5e-3), 8, 3),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, out, count, tests) in &cases {
        let good = out.interval_count == *count && out.history.len() == *tests && !out.floor_reached;
        ok &= good;
        parts.push(format!("{name}: {} intervals after {} tests", out.interval_count, out.history.len()));
    }
    report(lines, 8, "partition decisions on recorded discrepancy sequences", ok, parts.join("; "));
}

fn fd_deviation<L: LossModel>(model: &L, theta: &[f64], coords: &[usize]) -> Result<f64> {
    let obj = TapeObjective::new(model, Precision::F64);
    let grad = obj.evaluate(theta, true)?.grad.unwrap();
    let mut worst: f64 = 0.0;
    for &i in coords {
        let h = 1e-6 * theta[i].abs().max(1.0);
        let mut probe = theta.to_vec();
        probe[i] += h;
        let up = obj.evaluate(&probe, false)?.loss;
        probe[i] = theta[i] - h;
        let down = obj.evaluate(&probe, false)?.loss;
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((grad[i] - fd).abs() / fd.abs().max(1e-12));
    }
    Ok(worst)
}

fn invariants(lines: &mut Vec<Line>, kept: &Trained) -> Result<()> {
    let mut fails = Vec::new();
    let mut notes = Vec::new();

    // influence conditions and the partition of unity
    let (mut cond, mut unity): (f64, f64) = (0.0, 0.0);
    for family in Family::ALL {
        for (a, z) in [(0.0, 1.0), (1.0, 2.0), (0.25, 0.5)] {
            for frac in [0.1, 0.37, 0.5, 0.81, 1.0] {
                let spec = InfluenceSpec::fixed(family, a, z, a + frac * (z - a))?;
                cond = cond.max(verify_conditions(&spec).worst_violation());
                for j in 0..=400 {
                    let b = spec.bundle(a + 1.2 * (z - a) * j as f64 / 400.0)?;
                    unity = unity.max((b.lambda + b.eta - 1.0).abs());
                }
            }
        }
    }
    notes.push(format!("conditions {cond:.1e}, lambda+eta-1 {unity:.1e}"));
    if cond > 1e-12 {
        fails.push("influence conditions");
    }
    if unity > 1e-12 {
        fails.push("lambda + eta = 1");
    }

    // node continuity on every multi-interval run, plus a small fresh one
    let ac = Problem::new(ProblemKind::AllenCahn);
    let mut small = TrainingConfig::for_problem(&ac);
    small.architecture = Architecture {
        depth: 2,
        width: 8,
        embedding: Embedding::Fourier { modes: 2, period: ac.period() },
    };
    small.n_initial = 32;
    small.n_boundary = 16;
    small.n_residual = 128;
    small.adam.iters = 100;
    small.lbfgs.max_iters = 100;
    small.seed = 17;
    let mut fresh = train_sequence(&ac, &[0.0, 0.1, 0.2], &small)?;
    let (mut du, mut dut) = worst_jump(&node_smoothness_check(&fresh, 201)?);
    for (_, sol) in &kept.solutions {
        let (a, b) = worst_jump(&node_smoothness_check(sol, 201)?);
        du = du.max(a);
        dut = dut.max(b);
    }
    notes.push(format!(
        "node jumps over {} runs: u {du:.1e}, u_t {dut:.1e}",
        kept.solutions.len() + 1
    ));
    if du > 1e-6 || dut > 1e-5 {
        fails.push("node continuity");
    }

    // frozen past
    let before: Vec<Vec<u64>> = fresh
        .intervals
        .iter()
        .map(|iv| iv.params.values.iter().map(|v| v.to_bits()).collect())
        .collect();
    extend(&mut fresh, 0.3, &small)?;
    let frozen = fresh
        .intervals
        .iter()
        .zip(&before)
        .all(|(iv, bits)| iv.params.values.iter().map(|v| v.to_bits()).eq(bits.iter().copied()));
    if !frozen {
        fails.push("frozen past");
    }

    // loss gradients, including rho
    let mut grad: f64 = 0.0;
    for kind in [ProblemKind::Convection, ProblemKind::AllenCahn, ProblemKind::Kdv] {
        let p = Problem::new(kind);
        let spec_of = |span| {
            NetworkSpec::new(2, 8, Embedding::Fourier { modes: 2, period: p.period() }, span).unwrap()
        };
        let sets = sample_points(&p, (0.5, 1.0), (32, 16, 96), Sampling::LatinHypercube, 2);
        let prev_spec = spec_of((0.0, 0.5));
        let prev = init_network(&prev_spec, 21).values;
        let spec = spec_of((0.5, 1.0));
        let inf = InfluenceSpec::trainable_midpoint(Family::Cubic, 0.5, 1.0, DEFAULT_EPSILON)?.with_rho(0.3);
        let hard = HardLoss::new(&p, &prev_spec, &prev, &spec, &inf, p.default_weights(), &sets)?;
        let mut theta = init_network(&spec, 22).values;
        theta.push(0.3);
        let n = theta.len();
        let coords: Vec<usize> = (0..n).step_by(7).chain([n - 1]).collect();
        grad = grad.max(fd_deviation(&hard, &theta, &coords)?);
        let soft = SoftLoss::new(&p, &spec, p.default_weights(), &sets)?;
        let theta = init_network(&spec, 5).values;
        let coords: Vec<usize> = (0..theta.len()).step_by(5).collect();
        grad = grad.max(fd_deviation(&soft, &theta, &coords)?);
    }
    notes.push(format!("gradient fd {grad:.1e}"));
    if grad > 1e-5 {
        fails.push("gradient check");
    }

    // input derivatives against central differences
    let spec = NetworkSpec::new(3, 50, Embedding::Raw, (0.0, 1.0))?;
    let theta = init_network(&spec, 2024).values;
    let h = 1e-4;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-12);
    let (mut low, mut third): (f64, f64) = (0.0, 0.0);
    for (x, t) in [(0.3, 0.7), (-0.6, 0.2), (0.9, 0.45)] {
        let u = |x: f64, t: f64| forward(&spec, &theta, x, t).unwrap();
        let b = evaluate_bundle(&spec, &theta, (x, t), 3)?;
        let uxx_at = |x: f64| evaluate_bundle(&spec, &theta, (x, t), 3).unwrap().u_xx.unwrap();
        low = low
            .max(rel(b.u_x, (u(x + h, t) - u(x - h, t)) / (2.0 * h)))
            .max(rel(b.u_t, (u(x, t + h) - u(x, t - h)) / (2.0 * h)))
            .max(rel(b.u_xx.unwrap(), (u(x + h, t) - 2.0 * u(x, t) + u(x - h, t)) / (h * h)));
        third = third.max(rel(b.u_xxx.unwrap(), (uxx_at(x + h) - uxx_at(x - h)) / (2.0 * h)));
    }
    notes.push(format!("jet fd orders 1-2 {low:.1e}, order 3 {third:.1e}"));
    if low > 1e-5 || third > 1e-4 {
        fails.push("jet derivatives");
    }

    // exact convection residual
    let conv = Problem::new(ProblemKind::Convection);
    let mut res: f64 = 0.0;
    for i in 0..64 {
        for j in 0..33 {
            let x = std::f64::consts::TAU * i as f64 / 64.0;
            let t = 2.0 * j as f64 / 32.0;
            res = res.max(conv.residual(&conv.exact_bundle(x, t)?)?.abs());
        }
    }
    notes.push(format!("exact convection residual {res:.1e}"));
    if res > 1e-12 {
        fails.push("exact residual");
    }

    let detail = if fails.is_empty() {
        notes.join("; ")
    } else {
        format!("failed: {}; {}", fails.join(", "), notes.join("; "))
    };
    report(lines, 9, "invariant suites", fails.is_empty(), detail);
    Ok(())
}

fn refinement_change(coarse: &ReferenceGrid, fine: &ReferenceGrid) -> f64 {
    let r = fine.nx() / coarse.nx();
    let mut worst: f64 = 0.0;
    for k in 0..coarse.nt() {
        for j in 0..coarse.nx() {
            worst = worst.max((coarse.values[[k, j]] - fine.values[[k, r * j]]).abs());
        }
    }
    worst
}

fn oracle_quality(lines: &mut Vec<Line>, ac: &ReferenceGrid, kdv: &ReferenceGrid) -> Result<()> {
    let conv = Problem::new(ProblemKind::Convection);
    let g = solve_spectral(&conv, &SpectralConfig::new(ORACLE.0, ORACLE.1, 1.0))?;
    let mut sup: f64 = 0.0;
    for (k, t) in g.t_nodes().into_iter().enumerate() {
        for (j, x) in g.x_nodes().into_iter().enumerate() {
            sup = sup.max((g.values[[k, j]] - conv.exact_solution(x, t)?).abs());
        }
    }
    let refined = |kind| {
        solve_spectral(&Problem::new(kind), &SpectralConfig::new(REFINED.0, REFINED.1, 1.0))
    };
    let d_ac = refinement_change(ac, &refined(ProblemKind::AllenCahn)?);
    let d_kdv = refinement_change(kdv, &refined(ProblemKind::Kdv)?);
    let masses = frame_masses(kdv);
    let drift = masses.iter().map(|m| (m - masses[0]).abs()).fold(0.0, f64::max);
    let pass = sup <= 1e-8 && d_ac <= 1e-6 && d_kdv <= 1e-6 && drift <= 1e-8;
    report(
        lines,
        10,
        "oracle quality",
        pass,
        format!(
            "convection sup error {sup:.1e} (<= 1e-8); refinement change allen-cahn {d_ac:.1e}, kdv {d_kdv:.1e} (<= 1e-6); kdv mass drift {drift:.1e} (<= 1e-8)"
        ),
    );
    Ok(())
}

fn main() {
    let b = budget();
    let start = Instant::now();
    eprintln!(
        "acceptance: {} budget (N0={} Nb={} Nr={} adam={} lbfgs<={}), threads={}",
        b.label,
        b.n_initial,
        b.n_boundary,
        b.n_residual,
        b.adam,
        b.lbfgs,
        seqpinn_threads()
    );
    let mut lines = Vec::new();
    let mut kept = Trained::default();

    partition_decisions(&mut lines);

    let grid = |kind| solve_spectral(&Problem::new(kind), &SpectralConfig::new(ORACLE.0, ORACLE.1, 1.0));
    let (ac, kdv) = match (grid(ProblemKind::AllenCahn), grid(ProblemKind::Kdv)) {
        (Ok(a), Ok(k)) => (a, k),
        (a, k) => {
            eprintln!("reference grids failed: {:?} {:?}", a.err(), k.err());
            std::process::exit(1);
        }
    };
    if let Err(e) = oracle_quality(&mut lines, &ac, &kdv) {
        report(&mut lines, 10, "oracle quality", false, e.to_string());
    }

    convection_pair(&mut lines, &b, &mut kept);
    let conv = Problem::new(ProblemKind::Convection);
    seeded(
        &mut lines,
        3,
        "convection T=5, 1 interval: l2 >= 0.5",
        &conv,
        &[0.0, 5.0],
        &b,
        &mut kept,
        |e| e >= 0.5,
    );
    seeded(
        &mut lines,
        4,
        "convection T=5, 8 intervals, THC: l2 <= 2e-2",
        &conv,
        &uniform(5.0, 8),
        &b,
        &mut kept,
        |e| e <= 2e-2,
    );
    allen_cahn_pair(&mut lines, &b, &ac, &mut kept);
    kdv_pair(&mut lines, &b, &kdv, &mut kept);
    if let Err(e) = invariants(&mut lines, &kept) {
        report(&mut lines, 9, "invariant suites", false, e.to_string());
    }

    lines.sort_by_key(|l| l.id);
    println!("\nacceptance ({} budget, {:.0}s)", b.label, start.elapsed().as_secs_f64());
    for l in &lines {
        println!(
            "criterion {:>2} {} {}: {}",
            l.id,
            if l.pass { "PASS" } else { "FAIL" },
            l.name,
            l.detail
        );
    }
    let failed = lines.iter().filter(|l| !l.pass).count();
    println!("{} of {} criteria passed", lines.len() - failed, lines.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn seqpinn_threads() -> String {
    std::env::var("SEQPINN_THREADS").unwrap_or_else(|_| "default".into())
}
