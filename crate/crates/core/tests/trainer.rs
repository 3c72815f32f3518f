use seqpinn::diff::{evaluate_bundles, DerivativeBundle};
use seqpinn::influence::{Family, InfluenceSpec, PMode, DEFAULT_EPSILON};
use seqpinn::network::{init_network, Embedding, NetworkSpec};
use seqpinn::problem::{LossWeights, Problem, ProblemKind};
use seqpinn::trainer::*;

fn sets(problem: &Problem, span: (f64, f64), seed: u64) -> PointSets {
    sample_points(problem, span, (32, 16, 96), Sampling::LatinHypercube, seed)
}

fn small_spec(problem: &Problem, span: (f64, f64)) -> NetworkSpec {
    let embedding = Embedding::Fourier {
        modes: 2,
        period: problem.period(),
    };
    NetworkSpec::new(2, 8, embedding, span).unwrap()
}

/// One hidden unit in its linear regime: `tanh(eps sin x) / eps`, which is
/// `sin x` up to `eps^2`.
fn near_sine(span: (f64, f64)) -> (NetworkSpec, Vec<f64>) {
    let spec = NetworkSpec::new(1, 1, Embedding::Fourier { modes: 1, period: std::f64::consts::TAU }, span).unwrap();
    let eps = 1e-6;
    // [w_cos, w_sin, w_tau, b] then [w_out, b_out]
    (spec, vec![0.0, eps, 0.0, 0.0, 1.0 / eps, 0.0])
}

fn still_convection() -> Problem {
    let mut p = Problem::new(ProblemKind::Convection);
    p.beta = 0.0;
    p
}

fn tiny_config(problem: &Problem) -> TrainingConfig {
    let mut c = TrainingConfig::for_problem(problem);
    c.architecture = Architecture {
        depth: 2,
        width: 8,
        embedding: Embedding::Fourier {
            modes: 2,
            period: problem.period(),
        },
    };
    c.n_initial = 32;
    c.n_boundary = 16;
    c.n_residual = 128;
    c.adam.iters = 150;
    c.lbfgs.max_iters = 150;
    c.seed = 11;
    c
}

#[test]
fn soft_loss_vanishes_on_a_representable_exact_solution() {
    let p = still_convection();
    let (spec, params) = near_sine((0.0, 1.0));
    let s = sets(&p, (0.0, 1.0), 3);
    let model = SoftLoss::new(&p, &spec, p.default_weights(), &s).unwrap();
    let e = TapeObjective::new(&model, Precision::F64).evaluate(&params, false).unwrap();
    assert!(e.loss <= 1e-20, "{:e}", e.loss);
}

#[test]
fn zero_network_on_allen_cahn_pays_only_the_initial_term() {
    let p = Problem::new(ProblemKind::AllenCahn);
    let spec = small_spec(&p, (0.0, 0.25));
    let s = sets(&p, (0.0, 0.25), 5);
    let w = p.default_weights();
    assert_eq!((w.initial, w.boundary, w.residual), (100.0, 1.0, 1.0));
    let model = SoftLoss::new(&p, &spec, w, &s).unwrap();
    let zero = vec![0.0; spec.param_count()];
    let e = TapeObjective::new(&model, Precision::F64).evaluate(&zero, false).unwrap();
    let expected: f64 = s
        .initial_x
        .iter()
        .map(|&x| (x * x * (std::f64::consts::PI * x).cos()).powi(2))
        .sum::<f64>()
        / s.initial_x.len() as f64;
    assert!((e.terms.initial - expected).abs() <= 1e-15 * expected);
    assert_eq!(e.terms.boundary, 0.0);
    assert_eq!(e.terms.residual, 0.0);
    assert!((e.loss - 100.0 * expected).abs() <= 1e-13 * e.loss);
}

#[test]
fn residual_weight_enters_linearly() {
    let p = Problem::new(ProblemKind::Kdv);
    let spec = small_spec(&p, (0.0, 0.5));
    let s = sets(&p, (0.0, 0.5), 8);
    let params = init_network(&spec, 4).values;
    let eval = |w: LossWeights| {
        let m = SoftLoss::new(&p, &spec, w, &s).unwrap();
        TapeObjective::new(&m, Precision::F64).evaluate(&params, false).unwrap()
    };
    let one = eval(LossWeights { initial: 1.0, boundary: 1.0, residual: 1.0 });
    let two = eval(LossWeights { initial: 1.0, boundary: 1.0, residual: 2.0 });
    assert_eq!(one.terms, two.terms);
    assert!(((two.loss - one.loss) - one.terms.residual).abs() <= 1e-14 * two.loss);
}

fn bundle(u: f64, u_t: f64, u_x: f64, u_xx: f64) -> DerivativeBundle {
    DerivativeBundle {
        u,
        u_t,
        u_x,
        u_xx: Some(u_xx),
        u_xxx: None,
    }
}

#[test]
fn hard_field_reduces_to_each_side_and_averages_midway() {
    let prev = bundle(0.3, -1.2, 2.0, -0.5);
    let curr = bundle(-0.7, 0.4, 1.0, 3.5);
    let inf = InfluenceSpec::fixed(Family::Cubic, 1.0, 2.0, 1.5).unwrap();

    let at_start = hard_field(&prev, &curr, &inf.bundle(1.0).unwrap()).unwrap();
    assert_eq!(at_start, prev);

    for t in [1.5, 1.75, 2.0] {
        let past = hard_field(&prev, &curr, &inf.bundle(t).unwrap()).unwrap();
        assert_eq!(past, curr, "t = {t}");
    }

    // s = (t - t_start) / (p - t_start) = 0.5
    let w = inf.bundle(1.25).unwrap();
    assert!((w.lambda - 0.5).abs() <= 1e-15 && (w.eta - 0.5).abs() <= 1e-15);
    let mid = hard_field(&prev, &curr, &w).unwrap();
    assert!((mid.u - 0.5 * (prev.u + curr.u)).abs() <= 1e-15);
    assert!((mid.u_x - 0.5 * (prev.u_x + curr.u_x)).abs() <= 1e-15);
    assert!((mid.u_xx.unwrap() - 0.5 * (prev.u_xx.unwrap() + curr.u_xx.unwrap())).abs() <= 1e-15);
    let u_t = w.dlambda_dt * prev.u + 0.5 * prev.u_t + w.deta_dt * curr.u + 0.5 * curr.u_t;
    assert!((mid.u_t - u_t).abs() <= 1e-15);

    let mut partial = curr;
    partial.u_xx = None;
    assert!(hard_field(&prev, &partial, &w).is_err());
}

#[test]
fn hard_loss_vanishes_when_both_sides_are_exact() {
    let p = still_convection();
    let (prev_spec, prev) = near_sine((0.0, 1.0));
    let (spec, curr) = near_sine((1.0, 2.0));
    let inf = InfluenceSpec::trainable_midpoint(Family::Cubic, 1.0, 2.0, DEFAULT_EPSILON).unwrap();
    let s = sets(&p, (1.0, 2.0), 9);
    let model = HardLoss::new(&p, &prev_spec, &prev, &spec, &inf, p.default_weights(), &s).unwrap();
    let PMode::Trainable { rho, .. } = inf.p_mode else { unreachable!() };
    let mut theta = curr;
    theta.push(rho);
    let e = TapeObjective::new(&model, Precision::F64).evaluate(&theta, true).unwrap();
    assert!(e.loss <= 1e-20, "{:e}", e.loss);
    assert_eq!(e.terms.initial, 0.0);
}

/// Worst relative deviation of the tape gradient from central differences.
fn fd_deviation<L: LossModel>(model: &L, theta: &[f64], coords: &[usize]) -> f64 {
    let obj = TapeObjective::new(model, Precision::F64);
    let grad = obj.evaluate(theta, true).unwrap().grad.unwrap();
    let mut worst: f64 = 0.0;
    for &i in coords {
        let h = 1e-6 * theta[i].abs().max(1.0);
        let mut probe = theta.to_vec();
        probe[i] += h;
        let up = obj.evaluate(&probe, false).unwrap().loss;
        probe[i] = theta[i] - h;
        let down = obj.evaluate(&probe, false).unwrap().loss;
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((grad[i] - fd).abs() / fd.abs().max(1e-12));
    }
    worst
}

#[test]
fn hard_loss_gradient_matches_finite_differences() {
    for kind in [ProblemKind::Convection, ProblemKind::AllenCahn, ProblemKind::Kdv] {
        let p = Problem::new(kind);
        let prev_spec = small_spec(&p, (0.0, 0.5));
        let prev = init_network(&prev_spec, 21).values;
        let spec = small_spec(&p, (0.5, 1.0));
        let s = sets(&p, (0.5, 1.0), 2);
        let mut inf = InfluenceSpec::trainable_midpoint(Family::Cubic, 0.5, 1.0, DEFAULT_EPSILON).unwrap();
        // move p off the midpoint so that every branch of lambda is sampled
        inf = inf.with_rho(0.3);
        let model = HardLoss::new(&p, &prev_spec, &prev, &spec, &inf, p.default_weights(), &s).unwrap();
        let mut theta = init_network(&spec, 22).values;
        theta.push(0.3);
        let n = theta.len();
        let coords: Vec<usize> = (0..n).step_by(7).chain([n - 1]).collect();
        let dev = fd_deviation(&model, &theta, &coords);
        assert!(dev <= 1e-5, "{kind}: {dev:e}");
    }
}

#[test]
fn soft_loss_gradient_matches_finite_differences() {
    for kind in [ProblemKind::Convection, ProblemKind::AllenCahn, ProblemKind::Kdv] {
        let p = Problem::new(kind);
        let spec = small_spec(&p, (0.0, 0.5));
        let s = sets(&p, (0.0, 0.5), 6);
        let model = SoftLoss::new(&p, &spec, p.default_weights(), &s).unwrap();
        let theta = init_network(&spec, 5).values;
        let coords: Vec<usize> = (0..theta.len()).step_by(5).collect();
        let dev = fd_deviation(&model, &theta, &coords);
        assert!(dev <= 1e-5, "{kind}: {dev:e}");
    }
}

#[test]
fn clamped_influence_reduces_to_the_current_network_alone() {
    let p = Problem::new(ProblemKind::AllenCahn);
    let (a, b, pt) = (0.25, 0.5, 0.3);
    let prev_spec = small_spec(&p, (0.0, a));
    let prev = init_network(&prev_spec, 1).values;
    let spec = small_spec(&p, (a, b));
    let curr = init_network(&spec, 2).values;
    // every time strictly past p
    let s = sample_points(&p, (pt + 1e-9, b), (32, 16, 96), Sampling::LatinHypercube, 4);
    let inf = InfluenceSpec::fixed(Family::Cubic, a, b, pt).unwrap();
    let w = p.default_weights();
    let hard = HardLoss::new(&p, &prev_spec, &prev, &spec, &inf, w, &s).unwrap();
    let soft = SoftLoss::new(&p, &spec, w, &s).unwrap();
    let h = TapeObjective::new(&hard, Precision::F64).evaluate(&curr, false).unwrap();
    let f = TapeObjective::new(&soft, Precision::F64).evaluate(&curr, false).unwrap();
    assert!((h.terms.residual - f.terms.residual).abs() <= 1e-14 * f.terms.residual);
    assert!((h.terms.boundary - f.terms.boundary).abs() <= 1e-14 * f.terms.boundary.max(1e-300));
    assert_eq!(h.terms.initial, 0.0);
}

#[test]
fn first_interval_fits_a_reachable_target() {
    let p = still_convection();
    let mut c = tiny_config(&p);
    c.adam.iters = 300;
    c.lbfgs.max_iters = 500;
    let iv = train_interval(1, None, &p, (0.0, 1.0), &c).unwrap();
    assert!(iv.summary.final_loss <= 1e-8, "{:e}", iv.summary.final_loss);
    assert!(iv.influence.is_none());
}

fn continuity(sol: &ComposedSolution) -> (f64, f64) {
    let mut worst = (0.0f64, 0.0f64);
    let xs: Vec<f64> = (0..201)
        .map(|i| sol.problem.x_lo + sol.problem.period() * i as f64 / 200.0)
        .collect();
    for k in 1..sol.intervals.len() {
        let t = sol.intervals[k].t_span.0;
        let pts: Vec<(f64, f64)> = xs.iter().map(|&x| (x, t)).collect();
        let left = sol.bundles_on(k - 1, &pts, 1).unwrap();
        let right = sol.bundles_on(k, &pts, 1).unwrap();
        for (l, r) in left.iter().zip(&right) {
            worst.0 = worst.0.max((l.u - r.u).abs());
            worst.1 = worst.1.max((l.u_t - r.u_t).abs());
        }
    }
    worst
}

#[test]
fn sequence_is_continuous_frozen_and_reproducible() {
    let p = Problem::new(ProblemKind::AllenCahn);
    let c = tiny_config(&p);
    let mut sol = train_sequence(&p, &[0.0, 0.1, 0.2], &c).unwrap();
    let again = train_sequence(&p, &[0.0, 0.1, 0.2], &c).unwrap();
    for (a, b) in sol.intervals.iter().zip(&again.intervals) {
        assert_eq!(a.summary.final_loss.to_bits(), b.summary.final_loss.to_bits());
        assert_eq!(a.params, b.params);
    }

    let before: Vec<Vec<u64>> = sol
        .intervals
        .iter()
        .map(|i| i.params.values.iter().map(|v| v.to_bits()).collect())
        .collect();
    let inf_before: Vec<_> = sol.intervals.iter().map(|i| i.influence).collect();
    extend(&mut sol, 0.3, &c).unwrap();
    assert_eq!(sol.intervals.len(), 3);
    for (iv, (bits, inf)) in sol.intervals.iter().zip(before.iter().zip(&inf_before)) {
        let now: Vec<u64> = iv.params.values.iter().map(|v| v.to_bits()).collect();
        assert_eq!(&now, bits, "interval {} changed", iv.index);
        assert_eq!(&iv.influence, inf);
    }

    for iv in &sol.intervals[1..] {
        let p = iv.p().unwrap();
        assert!(p > iv.t_span.0 && p < iv.t_span.1, "p = {p}");
    }
    let (du, dut) = continuity(&sol);
    assert!(du <= 1e-6 && dut <= 1e-5, "{du:e} {dut:e}");
}

#[test]
fn one_interval_schedule_is_the_standard_pinn() {
    let p = Problem::new(ProblemKind::Kdv);
    let mut c = tiny_config(&p);
    c.architecture.embedding = Embedding::Raw;
    c.adam.iters = 40;
    c.lbfgs.max_iters = 20;
    let sol = train_sequence(&p, &[0.0, 0.3], &c).unwrap();
    let direct = train_interval(1, None, &p, (0.0, 0.3), &c).unwrap();
    assert_eq!(sol.intervals.len(), 1);
    assert_eq!(sol.intervals[0], direct);
    let pts = [(0.1, 0.0), (-0.4, 0.15), (0.9, 0.3)];
    let bundles = evaluate_bundles(&direct.spec, &direct.params.values, &pts, 1).unwrap();
    for (v, b) in sol.evaluate_batch(&pts).unwrap().iter().zip(&bundles) {
        assert_eq!(*v, b.u);
    }
}

#[test]
fn fixed_p_modes_place_p_where_asked() {
    let p = Problem::new(ProblemKind::AllenCahn);
    let mut c = tiny_config(&p);
    c.adam.iters = 20;
    c.lbfgs.max_iters = 5;
    for (choice, want) in [(PChoice::Right, 0.2), (PChoice::Midpoint, 0.15)] {
        c.p_choice = choice;
        let sol = train_sequence(&p, &[0.0, 0.1, 0.2], &c).unwrap();
        assert!((sol.intervals[1].p().unwrap() - want).abs() <= 1e-15);
        assert!(!sol.intervals[1].influence.unwrap().is_trainable());
    }
}

#[test]
fn misordered_schedules_are_rejected() {
    let p = Problem::new(ProblemKind::Convection);
    let c = tiny_config(&p);
    assert!(train_sequence(&p, &[0.0], &c).is_err());
    assert!(train_sequence(&p, &[0.0, 0.5, 0.5], &c).is_err());
    let first = {
        let mut c = c.clone();
        c.adam.iters = 2;
        c.lbfgs.max_iters = 1;
        train_interval(1, None, &p, (0.0, 0.5), &c).unwrap()
    };
    assert!(train_interval(2, Some(&first), &p, (0.6, 1.0), &c).is_err());
    assert!(train_interval(2, None, &p, (0.5, 1.0), &c).is_err());
}
