//! Browser demo: influence curves, spectral reference fields and a replayed
//! partition search. The plain functions are what the tests exercise; the
//! `wasm_bindgen` wrappers only flatten results for JavaScript.

use seqpinn::influence::{Family, InfluenceSpec};
use seqpinn::oracle::{solve_spectral, SpectralConfig};
use seqpinn::partition::{adapt_partition, history_table, HorizonSolver};
use seqpinn::problem::Problem;
use seqpinn::Result;
use wasm_bindgen::prelude::*;

/// `lambda`, `eta` and `d lambda / dt` sampled on `[0, 1]` for a transition at `p`.
#[derive(Clone, Debug, PartialEq)]
pub struct Curves {
    pub t: Vec<f64>,
    pub lambda: Vec<f64>,
    pub eta: Vec<f64>,
    pub dlambda: Vec<f64>,
}

pub fn influence_curves(family: &str, p: f64, samples: usize) -> Result<Curves> {
    let family: Family = family.parse()?;
    let spec = InfluenceSpec::fixed(family, 0.0, 1.0, p)?;
    let n = samples.max(2);
    let mut out = Curves {
        t: Vec::with_capacity(n),
        lambda: Vec::with_capacity(n),
        eta: Vec::with_capacity(n),
        dlambda: Vec::with_capacity(n),
    };
    for i in 0..n {
        let t = i as f64 / (n - 1) as f64;
        let b = spec.bundle(t)?;
        out.t.push(t);
        out.lambda.push(b.lambda);
        out.eta.push(b.eta);
        out.dlambda.push(b.dlambda_dt);
    }
    Ok(out)
}

/// Row-major `frames x nx` field with its box.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub nx: usize,
    pub frames: usize,
    pub x_span: (f64, f64),
    pub t_end: f64,
    pub values: Vec<f64>,
}

pub fn spectral_field(problem: &str, t_end: f64, nx: usize, dt: f64, frames: usize) -> Result<Field> {
    let problem = Problem::by_name(problem)?;
    let cfg = SpectralConfig { frames, ..SpectralConfig::new(nx, dt, t_end) };
    let g = solve_spectral(&problem, &cfg)?;
    Ok(Field {
        nx: g.nx(),
        frames: g.nt(),
        x_span: (g.x_lo, g.x_hi),
        t_end: g.t_hi,
        values: g.values.iter().copied().collect(),
    })
}

/// Discrepancies recorded from full training runs, one per halving test.
pub fn recorded_discrepancies(problem: &str) -> Option<(f64, &'static [f64])> {
    match problem {
        "convection" => Some((5.0, &[9.9493e-1, 1.5895e-3, 8.0895e-4, 3.9079e-4])),
        "allen_cahn" => Some((1.0, &[1.8612e-2, 1.2713e-3, 6.4375e-4, 7.0378e-4])),
        "kdv" => Some((1.0, &[3.3025e-2, 5.4692e-3, 2.2238e-3, 1.3416e-3])),
        _ => None,
    }
}

/// Stands in for training: the solution at `t_init / 2^k` is a constant
/// scale chosen so consecutive pairs reproduce the recorded discrepancies.
struct Replay {
    t_init: f64,
    scales: Vec<f64>,
}

impl HorizonSolver for Replay {
    type Solution = f64;

    fn solve(&mut self, horizon: f64) -> Result<f64> {
        let k = (self.t_init / horizon).log2().round() as usize;
        self.scales.get(k).copied().ok_or_else(|| {
            seqpinn::Error::Unsupported(format!("no recorded run for T = {horizon}"))
        })
    }

    fn values(&self, s: &f64, points: &[(f64, f64)]) -> Result<Vec<f64>> {
        Ok(points.iter().map(|_| *s).collect())
    }

    fn test_points(&self, horizon: f64, m: usize, _seed: u64) -> Vec<(f64, f64)> {
        (0..m).map(|i| (0.0, horizon * i as f64 / m as f64)).collect()
    }
}

/// Halving-search table replayed from the recorded discrepancies.
pub fn partition_trace(problem: &str, delta: f64) -> Result<String> {
    let (t_init, ds) = recorded_discrepancies(problem)
        .ok_or_else(|| seqpinn::Error::Config(format!("no recorded discrepancies for `{problem}`")))?;
    let mut scales = vec![1.0];
    for d in ds {
        let last = *scales.last().unwrap();
        scales.push(last / (1.0 + d));
    }
    let out = adapt_partition(&mut Replay { t_init, scales }, t_init, delta, 4, 0)?;
    Ok(format!(
        "{}\nchosen: {} intervals of length {}\n",
        history_table(&out.history),
        out.interval_count,
        out.interval_length
    ))
}

fn js(e: seqpinn::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// `[t..., lambda..., eta..., dlambda...]`, each `samples` long.
#[wasm_bindgen(js_name = influenceCurves)]
pub fn influence_curves_js(family: &str, p: f64, samples: usize) -> Result<Vec<f64>, JsValue> {
    let c = influence_curves(family, p, samples).map_err(js)?;
    Ok([c.t, c.lambda, c.eta, c.dlambda].concat())
}

/// `[nx, frames, x_lo, x_hi, t_end, values...]`.
#[wasm_bindgen(js_name = spectralField)]
pub fn spectral_field_js(problem: &str, t_end: f64, nx: usize, dt: f64, frames: usize) -> Result<Vec<f64>, JsValue> {
    let f = spectral_field(problem, t_end, nx, dt, frames).map_err(js)?;
    let mut out = vec![f.nx as f64, f.frames as f64, f.x_span.0, f.x_span.1, f.t_end];
    out.extend_from_slice(&f.values);
    Ok(out)
}

#[wasm_bindgen(js_name = partitionTrace)]
pub fn partition_trace_js(problem: &str, delta: f64) -> Result<String, JsValue> {
    partition_trace(problem, delta).map_err(js)
}
