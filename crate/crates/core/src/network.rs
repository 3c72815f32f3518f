//! Dense tanh networks with optional periodic Fourier input features.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diff::{self, JetLayout};
use crate::error::{Error, Result};
use crate::real::Real;

/// How `(x, t)` is presented to the first layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Embedding {
    /// `[x, tau]`.
    Raw,
    /// `[cos(w x), sin(w x), ..., cos(m w x), sin(m w x), tau]` with
    /// `w = 2 pi / period`; the network is exactly `period`-periodic in `x`.
    Fourier { modes: usize, period: f64 },
}

/// Architecture of a scalar-output tanh network.
///
/// Time enters as `tau`, the affine image of `time_span` onto `[-1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub depth: usize,
    pub width: usize,
    pub embedding: Embedding,
    pub time_span: (f64, f64),
}

/// Position of one affine layer inside the flat parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerShape {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

impl NetworkSpec {
    pub fn new(
        depth: usize,
        width: usize,
        embedding: Embedding,
        time_span: (f64, f64),
    ) -> Result<Self> {
        let spec = NetworkSpec {
            depth,
            width,
            embedding,
            time_span,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.width == 0 {
            return Err(Error::Config(format!(
                "network depth and width must be >= 1 (got {}x{})",
                self.depth, self.width
            )));
        }
        if let Embedding::Fourier { modes, period } = self.embedding {
            if modes == 0 {
                return Err(Error::Config("fourier mode count must be >= 1".into()));
            }
            if !(period > 0.0 && period.is_finite()) {
                return Err(Error::Config(format!("fourier period must be > 0 (got {period})")));
            }
        }
        let (lo, hi) = self.time_span;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!("invalid time span [{lo}, {hi}]")));
        }
        Ok(())
    }

    pub fn with_time_span(&self, time_span: (f64, f64)) -> Self {
        NetworkSpec {
            time_span,
            ..self.clone()
        }
    }

    pub fn input_dim(&self) -> usize {
        match self.embedding {
            Embedding::Raw => 2,
            Embedding::Fourier { modes, .. } => 2 * modes + 1,
        }
    }

    pub fn layers(&self) -> Vec<LayerShape> {
        let mut dims = vec![self.input_dim()];
        dims.extend(std::iter::repeat_n(self.width, self.depth));
        dims.push(1);
        let mut offset = 0;
        dims.windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let shape = LayerShape {
                    fan_in,
                    fan_out,
                    weight_offset: offset,
                    bias_offset: offset + fan_in * fan_out,
                };
                offset += fan_in * fan_out + fan_out;
                shape
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers()
            .iter()
            .map(|l| l.fan_in * l.fan_out + l.fan_out)
            .sum()
    }

    /// `d tau / d t`.
    pub fn time_scale(&self) -> f64 {
        2.0 / (self.time_span.1 - self.time_span.0)
    }

    pub fn rescale_time(&self, t: f64) -> f64 {
        (t - self.time_span.0) * self.time_scale() - 1.0
    }

    /// Dimension and finiteness check shared by every evaluation entry point.
    pub fn check_params(&self, params: &[f64]) -> Result<()> {
        let expected = self.param_count();
        if params.len() != expected {
            return Err(Error::Config(format!(
                "parameter vector has {} entries, network expects {expected}",
                params.len()
            )));
        }
        for (k, layer) in self.layers().iter().enumerate() {
            let end = layer.bias_offset + layer.fan_out;
            if params[layer.weight_offset..end].iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    location: format!("parameters of layer {k}"),
                });
            }
        }
        Ok(())
    }
}

/// Flat trainable parameters in canonical order: layer by layer, row-major
/// weights followed by biases.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub seed: u64,
}

impl ParamVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_network(spec: &NetworkSpec, seed: u64) -> ParamVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0; spec.param_count()];
    for layer in spec.layers() {
        let limit = (6.0 / (layer.fan_in + layer.fan_out) as f64).sqrt();
        for w in &mut values[layer.weight_offset..layer.bias_offset] {
            *w = rng.random_range(-limit..limit);
        }
    }
    ParamVector { values, seed }
}

/// Harmonic features `[cos(k w x), sin(k w x)]` for `k = 1..=m`.
pub fn fourier_embed(x: f64, m: usize, period: f64) -> Vec<f64> {
    let omega = std::f64::consts::TAU / period;
    (1..=m)
        .flat_map(|k| {
            let a = k as f64 * omega * x;
            [a.cos(), a.sin()]
        })
        .collect()
}

/// Stacked input jets for a batch of points: `(channels * n) x input_dim`.
pub fn embed_jets<T: Real>(spec: &NetworkSpec, points: &[(f64, f64)], layout: JetLayout) -> Array2<T> {
    let n = points.len();
    let d = spec.input_dim();
    let mut out = Array2::<f64>::zeros((layout.channels() * n, d));
    let tau_col = d - 1;
    let dtau = spec.time_scale();
    for (i, &(x, t)) in points.iter().enumerate() {
        out[[i, tau_col]] = spec.rescale_time(t);
        if let Some(c) = layout.t_channel() {
            out[[c * n + i, tau_col]] = dtau;
        }
        match spec.embedding {
            Embedding::Raw => {
                out[[i, 0]] = x;
                if layout.x_order >= 1 {
                    out[[n + i, 0]] = 1.0;
                }
            }
            Embedding::Fourier { modes, period } => {
                let omega = std::f64::consts::TAU / period;
                for k in 1..=modes {
                    let kw = k as f64 * omega;
                    let (s, c) = (kw * x).sin_cos();
                    let col = 2 * (k - 1);
                    // successive x-derivatives of (cos, sin) rotate by a quarter turn
                    let mut pair = (c, s);
                    let mut scale = 1.0;
                    for order in 0..=layout.x_order {
                        out[[order * n + i, col]] = scale * pair.0;
                        out[[order * n + i, col + 1]] = scale * pair.1;
                        pair = (-pair.1, pair.0);
                        scale *= kw;
                    }
                }
            }
        }
    }
    out.mapv(T::of)
}

/// Network output at one point.
pub fn forward(spec: &NetworkSpec, params: &[f64], x: f64, t: f64) -> Result<f64> {
    Ok(forward_batch(spec, params, &[(x, t)])?[0])
}

/// Network outputs at many points, sharing one batched pass.
pub fn forward_batch(spec: &NetworkSpec, params: &[f64], points: &[(f64, f64)]) -> Result<Vec<f64>> {
    spec.check_params(params)?;
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let mut tape = diff::Tape::<f64>::new();
    let theta = tape.constant_vector(params);
    let layout = JetLayout::value_only();
    let inputs = tape.constant(embed_jets(spec, points, layout));
    let out = diff::network_on_tape(&mut tape, spec, theta, 0, inputs, layout, points.len());
    Ok(tape.value(out).column(0).to_vec())
}
