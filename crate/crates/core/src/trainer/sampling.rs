use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::problem::Problem;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    #[default]
    LatinHypercube,
    Uniform,
}

/// Collocation sets for one interval.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSets {
    /// Equispaced `x` at the interval start (soft loss only).
    pub initial_x: Vec<f64>,
    pub initial_t: f64,
    /// Boundary times; each is paired with both spatial endpoints.
    pub boundary_t: Vec<f64>,
    /// Interior residual points `(x, t)`.
    pub residual: Vec<(f64, f64)>,
}

/// `n` Latin-hypercube samples in `[0, 1)^dims`: every axis has exactly one
/// sample per stratum `[k/n, (k+1)/n)`.
pub fn latin_hypercube(n: usize, dims: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; dims]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for d in 0..dims {
        strata.shuffle(rng);
        for (i, &k) in strata.iter().enumerate() {
            out[i][d] = (k as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    out
}

fn unit_samples(n: usize, dims: usize, sampling: Sampling, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    match sampling {
        Sampling::LatinHypercube => latin_hypercube(n, dims, rng),
        Sampling::Uniform => (0..n)
            .map(|_| (0..dims).map(|_| rng.random::<f64>()).collect())
            .collect(),
    }
}

/// Space-time samples in `[x_lo, x_hi] x [t_lo, t_hi]`.
pub fn space_time_samples(
    problem: &Problem,
    t_span: (f64, f64),
    n: usize,
    sampling: Sampling,
    rng: &mut impl Rng,
) -> Vec<(f64, f64)> {
    let (xl, xw) = (problem.x_lo, problem.period());
    let (tl, tw) = (t_span.0, t_span.1 - t_span.0);
    unit_samples(n, 2, sampling, rng)
        .into_iter()
        .map(|u| (xl + xw * u[0], tl + tw * u[1]))
        .collect()
}

/// Draws the initial, boundary and residual sets for `t_span`; deterministic in `seed`.
pub fn sample_points(
    problem: &Problem,
    t_span: (f64, f64),
    counts: (usize, usize, usize),
    sampling: Sampling,
    seed: u64,
) -> PointSets {
    let (n0, nb, nr) = counts;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let residual = space_time_samples(problem, t_span, nr, sampling, &mut rng);
    let tw = t_span.1 - t_span.0;
    let boundary_t = unit_samples(nb, 1, sampling, &mut rng)
        .into_iter()
        .map(|u| t_span.0 + tw * u[0])
        .collect();
    let initial_x = (0..n0)
        .map(|i| {
            if n0 == 1 {
                problem.x_lo
            } else {
                problem.x_lo + problem.period() * i as f64 / (n0 - 1) as f64
            }
        })
        .collect();
    PointSets {
        initial_x,
        initial_t: t_span.0,
        boundary_t,
        residual,
    }
}
