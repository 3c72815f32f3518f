use super::{JetLayout, Tape, Var};
use crate::error::{Error, Result};
use crate::network::{embed_jets, NetworkSpec};
use crate::real::Real;

/// Field value and input partial derivatives at one space-time point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeBundle {
    pub u: f64,
    pub u_t: f64,
    pub u_x: f64,
    pub u_xx: Option<f64>,
    pub u_xxx: Option<f64>,
}

impl DerivativeBundle {
    /// `d^k u / dx^k`; `k = 0` is the value.
    pub fn x_derivative(&self, k: usize) -> Option<f64> {
        match k {
            0 => Some(self.u),
            1 => Some(self.u_x),
            2 => self.u_xx,
            3 => self.u_xxx,
            _ => None,
        }
    }

    pub fn max_x_order(&self) -> usize {
        match (self.u_xx, self.u_xxx) {
            (_, Some(_)) => 3,
            (Some(_), None) => 2,
            _ => 1,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.u, self.u_t, self.u_x].iter().all(|v| v.is_finite())
            && self.u_xx.is_none_or(f64::is_finite)
            && self.u_xxx.is_none_or(f64::is_finite)
    }

    pub(crate) fn from_channels(layout: JetLayout, get: impl Fn(usize) -> f64) -> Self {
        let t = layout.t_channel().map(&get).unwrap_or(0.0);
        DerivativeBundle {
            u: get(0),
            u_t: t,
            u_x: if layout.x_order >= 1 { get(1) } else { 0.0 },
            u_xx: (layout.x_order >= 2).then(|| get(2)),
            u_xxx: (layout.x_order >= 3).then(|| get(3)),
        }
    }
}

/// Records the network's stacked-jet forward pass on `tape`.
///
/// `theta` is a flat parameter column and the network's parameters start at
/// `offset` within it. `inputs` holds the embedded input jets for `points`
/// points. Returns the `(channels * points) x 1` output jet.
pub fn network_on_tape<T: Real>(
    tape: &mut Tape<T>,
    spec: &NetworkSpec,
    theta: Var,
    offset: usize,
    inputs: Var,
    layout: JetLayout,
    points: usize,
) -> Var {
    let layers = spec.layers();
    let last = layers.len() - 1;
    let mut act = inputs;
    for (k, layer) in layers.iter().enumerate() {
        let w = tape.view(
            theta,
            offset + layer.weight_offset,
            layer.fan_out,
            layer.fan_in,
        );
        let b = tape.view(theta, offset + layer.bias_offset, 1, layer.fan_out);
        let z = tape.jet_linear(act, w, b, points);
        act = if k == last {
            z
        } else {
            tape.tanh_jet(z, layout, points)
        };
    }
    act
}

/// Exact value, `u_t` and `x`-derivatives up to `max_x_order` at one point.
pub fn evaluate_bundle(
    spec: &NetworkSpec,
    params: &[f64],
    point: (f64, f64),
    max_x_order: usize,
) -> Result<DerivativeBundle> {
    Ok(evaluate_bundles(spec, params, &[point], max_x_order)?[0])
}

/// Batched [`evaluate_bundle`].
pub fn evaluate_bundles(
    spec: &NetworkSpec,
    params: &[f64],
    points: &[(f64, f64)],
    max_x_order: usize,
) -> Result<Vec<DerivativeBundle>> {
    if !(1..=3).contains(&max_x_order) {
        return Err(Error::Config(format!(
            "max_x_order must be 1, 2 or 3 (got {max_x_order})"
        )));
    }
    spec.check_params(params)?;
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let layout = JetLayout::new(max_x_order, true);
    let n = points.len();
    let mut tape = Tape::<f64>::new();
    let theta = tape.constant_vector(params);
    let inputs = tape.constant(embed_jets(spec, points, layout));
    let out = network_on_tape(&mut tape, spec, theta, 0, inputs, layout, n);
    let col = tape.value(out).column(0);
    let bundles: Vec<_> = (0..n)
        .map(|i| DerivativeBundle::from_channels(layout, |c| col[c * n + i]))
        .collect();
    if let Some(i) = bundles.iter().position(|b| !b.is_finite()) {
        return Err(Error::NonFinite {
            location: format!("network output at point {:?}", points[i]),
        });
    }
    Ok(bundles)
}
