use seqpinn::diff::{evaluate_bundle, evaluate_bundles};
use seqpinn::network::{forward, init_network, Embedding, NetworkSpec};
use seqpinn::problem::{Problem, ProblemKind};
use seqpinn::trainer::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

#[test]
fn random_net_matches_central_differences() {
    let spec = NetworkSpec::new(3, 50, Embedding::Raw, (0.0, 1.0)).unwrap();
    let p = init_network(&spec, 2024).values;
    let (x, t) = (0.3, 0.7);
    let h = 1e-4;
    let b = evaluate_bundle(&spec, &p, (x, t), 3).unwrap();
    let u = |x: f64, t: f64| forward(&spec, &p, x, t).unwrap();
    let at = |x: f64| evaluate_bundle(&spec, &p, (x, t), 3).unwrap();

    let u_x = (u(x + h, t) - u(x - h, t)) / (2.0 * h);
    let u_t = (u(x, t + h) - u(x, t - h)) / (2.0 * h);
    let u_xx = (u(x + h, t) - 2.0 * u(x, t) + u(x - h, t)) / (h * h);
    // third order from differences of the (already checked) second derivative
    let u_xxx = (at(x + h).u_xx.unwrap() - at(x - h).u_xx.unwrap()) / (2.0 * h);
    assert!(rel(b.u_x, u_x) <= 1e-5, "u_x {:e}", rel(b.u_x, u_x));
    assert!(rel(b.u_t, u_t) <= 1e-5, "u_t {:e}", rel(b.u_t, u_t));
    assert!(rel(b.u_xx.unwrap(), u_xx) <= 1e-5, "u_xx {:e}", rel(b.u_xx.unwrap(), u_xx));
    assert!(rel(b.u_xxx.unwrap(), u_xxx) <= 1e-4, "u_xxx {:e}", rel(b.u_xxx.unwrap(), u_xxx));
    // and the same third derivative from values alone, where round-off allows it
    let u_xxx_direct = (u(x + 2.0 * h, t) - 2.0 * u(x + h, t) + 2.0 * u(x - h, t) - u(x - 2.0 * h, t)) / (2.0 * h * h * h);
    assert!((b.u_xxx.unwrap() - u_xxx_direct).abs() <= 1e-3 * b.u_xxx.unwrap().abs().max(1.0));
}

#[test]
fn harmonic_feature_closed_form() {
    // u = tanh(sin x)
    let spec = NetworkSpec::new(1, 1, Embedding::Fourier { modes: 1, period: std::f64::consts::TAU }, (0.0, 1.0)).unwrap();
    let p = [0.0, 1.0, 0.0, 0.0, 1.0, 0.0];
    for x in [-2.0, -0.4, 0.0, 0.9, 2.7] {
        let b = evaluate_bundle(&spec, &p, (x, 0.5), 3).unwrap();
        let (s, c) = f64::sin_cos(x);
        let y = s.tanh();
        let d1 = 1.0 - y * y;
        let d2 = -2.0 * y * d1;
        let d3 = -2.0 * (d1 * d1 + y * d2);
        let want = [y, d1 * c, d2 * c * c - d1 * s, d3 * c * c * c - 3.0 * d2 * c * s - d1 * c];
        let got = [b.u, b.u_x, b.u_xx.unwrap(), b.u_xxx.unwrap()];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= 1e-10 * w.abs().max(1.0), "x={x}: {g} vs {w}");
        }
        assert_eq!(b.u_t, 0.0);
    }
}

/// Side-by-side network computing `a * net1 + b * net2`.
fn merged(spec: &NetworkSpec, p1: &[f64], p2: &[f64], a: f64, b: f64) -> (NetworkSpec, Vec<f64>) {
    let w = spec.width;
    let m = NetworkSpec::new(spec.depth, 2 * w, spec.embedding, spec.time_span).unwrap();
    let mut out = vec![0.0; m.param_count()];
    let (small, big) = (spec.layers(), m.layers());
    let last = small.len() - 1;
    for (k, (s, g)) in small.iter().zip(&big).enumerate() {
        for (net, params) in [(0usize, p1), (1, p2)] {
            for r in 0..s.fan_out {
                for c in 0..s.fan_in {
                    let v = params[s.weight_offset + r * s.fan_in + c];
                    let (row, col, v) = if k == last {
                        (r, net * s.fan_in + c, v * if net == 0 { a } else { b })
                    } else if k == 0 {
                        (net * s.fan_out + r, c, v)
                    } else {
                        (net * s.fan_out + r, net * s.fan_in + c, v)
                    };
                    out[g.weight_offset + row * g.fan_in + col] = v;
                }
                let bias = params[s.bias_offset + r];
                if k == last {
                    out[g.bias_offset + r] += bias * if net == 0 { a } else { b };
                } else {
                    out[g.bias_offset + net * s.fan_out + r] = bias;
                }
            }
        }
    }
    (m, out)
}

#[test]
fn bundles_are_linear_in_the_readout() {
    let spec = NetworkSpec::new(2, 5, Embedding::Fourier { modes: 2, period: 2.0 }, (0.0, 0.5)).unwrap();
    let p1 = init_network(&spec, 1).values;
    let p2 = init_network(&spec, 2).values;
    let (a, b) = (0.7, -1.3);
    let (m, pm) = merged(&spec, &p1, &p2, a, b);
    let pts = [(-0.8, 0.0), (0.1, 0.2), (0.65, 0.5)];
    let b1 = evaluate_bundles(&spec, &p1, &pts, 3).unwrap();
    let b2 = evaluate_bundles(&spec, &p2, &pts, 3).unwrap();
    let bm = evaluate_bundles(&m, &pm, &pts, 3).unwrap();
    for i in 0..pts.len() {
        for (k, (x, y, z)) in [
            (b1[i].u, b2[i].u, bm[i].u),
            (b1[i].u_t, b2[i].u_t, bm[i].u_t),
            (b1[i].u_x, b2[i].u_x, bm[i].u_x),
            (b1[i].u_xx.unwrap(), b2[i].u_xx.unwrap(), bm[i].u_xx.unwrap()),
            (b1[i].u_xxx.unwrap(), b2[i].u_xxx.unwrap(), bm[i].u_xxx.unwrap()),
        ]
        .into_iter()
        .enumerate()
        {
            let want = a * x + b * y;
            assert!((z - want).abs() <= 1e-12 * want.abs().max(1.0), "point {i} entry {k}: {z} vs {want}");
        }
    }
}

#[test]
fn soft_loss_gradient_on_a_full_size_net() {
    let p = Problem::new(ProblemKind::AllenCahn);
    let (depth, width, embedding) = p.default_architecture();
    let spec = NetworkSpec::new(depth, width, embedding, (0.0, 0.25)).unwrap();
    let sets = sample_points(&p, (0.0, 0.25), (64, 64, 64), Sampling::LatinHypercube, 9);
    let model = SoftLoss::new(&p, &spec, p.default_weights(), &sets).unwrap();
    let theta = init_network(&spec, 13).values;
    let obj = TapeObjective::new(&model, Precision::F64);
    let grad = obj.evaluate(&theta, true).unwrap().grad.unwrap();
    let mut worst: f64 = 0.0;
    for i in (0..theta.len()).step_by(97) {
        let h = 1e-6 * theta[i].abs().max(1.0);
        let mut probe = theta.clone();
        probe[i] += h;
        let up = obj.evaluate(&probe, false).unwrap().loss;
        probe[i] = theta[i] - h;
        let down = obj.evaluate(&probe, false).unwrap().loss;
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((grad[i] - fd).abs() / fd.abs().max(1e-12));
    }
    assert!(worst <= 1e-5, "{worst:e}");
}

#[test]
fn repeated_evaluation_is_bit_identical() {
    let spec = NetworkSpec::new(3, 50, Embedding::Raw, (0.0, 1.0)).unwrap();
    let p = init_network(&spec, 8).values;
    let pts: Vec<(f64, f64)> = (0..40).map(|i| (-1.0 + 0.05 * i as f64, 0.025 * i as f64)).collect();
    let a = evaluate_bundles(&spec, &p, &pts, 3).unwrap();
    let b = evaluate_bundles(&spec, &p, &pts, 3).unwrap();
    assert_eq!(a, b);
    for (pt, bundle) in pts.iter().zip(&a) {
        assert_eq!(bundle.u, forward(&spec, &p, pt.0, pt.1).unwrap());
    }
}
