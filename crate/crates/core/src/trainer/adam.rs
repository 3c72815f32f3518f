use serde::{Deserialize, Serialize};

use super::objective::Objective;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub iters: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            iters: 5000,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if !ok {
            return Err(Error::Config(format!("invalid adam settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct AdamResult {
    pub params: Vec<f64>,
    /// Loss before each update.
    pub trace: Vec<f64>,
}

/// Adam with bias correction. Returns the parameters after `iters` updates.
pub fn run_adam(obj: &impl Objective, params: &[f64], cfg: &AdamConfig) -> Result<AdamResult> {
    cfg.validate()?;
    let mut x = params.to_vec();
    let mut m = vec![0.0; x.len()];
    let mut v = vec![0.0; x.len()];
    let mut trace = Vec::with_capacity(cfg.iters);
    let (mut b1t, mut b2t) = (1.0, 1.0);
    for it in 0..cfg.iters {
        let (loss, g) = obj.eval(&x)?;
        if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { iteration: it, loss });
        }
        trace.push(loss);
        b1t *= cfg.beta1;
        b2t *= cfg.beta2;
        for i in 0..x.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let mh = m[i] / (1.0 - b1t);
            let vh = v[i] / (1.0 - b2t);
            x[i] -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
        }
        if it % 500 == 0 {
            log::debug!("adam {it}: loss {loss:.6e}");
        }
    }
    Ok(AdamResult { params: x, trace })
}
