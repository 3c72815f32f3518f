//! Benchmark evolutionary PDEs on periodic 1D domains.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diff::{DerivativeBundle, Tape, Var};
use crate::error::{Error, Result};
use crate::network::Embedding;
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// `u_t + beta u_x = 0` on `[0, 2 pi]`, `u(x, 0) = sin x`.
    Convection,
    /// `u_t - 1e-4 u_xx + 5 u^3 - 5 u = 0` on `[-1, 1]`, `u(x, 0) = x^2 cos(pi x)`.
    AllenCahn,
    /// `u_t + u u_x + 0.0025 u_xxx = 0` on `[-1, 1]`, `u(x, 0) = cos(pi x)`.
    Kdv,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 3] = [ProblemKind::Convection, ProblemKind::AllenCahn, ProblemKind::Kdv];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Convection => "convection",
            ProblemKind::AllenCahn => "allen_cahn",
            ProblemKind::Kdv => "kdv",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "convection" => Ok(ProblemKind::Convection),
            "allen_cahn" => Ok(ProblemKind::AllenCahn),
            "kdv" => Ok(ProblemKind::Kdv),
            other => Err(Error::Config(format!(
                "unknown problem `{other}` (expected convection, allen_cahn or kdv)"
            ))),
        }
    }
}

/// Loss weights `(w_i, w_b, w_r)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub initial: f64,
    pub boundary: f64,
    pub residual: f64,
}

/// Per-point derivative channels of a field recorded on a tape.
#[derive(Clone, Copy, Debug)]
pub struct FieldChannels {
    pub u: Var,
    pub u_t: Option<Var>,
    pub u_x: Option<Var>,
    pub u_xx: Option<Var>,
    pub u_xxx: Option<Var>,
}

impl FieldChannels {
    pub fn x_derivative(&self, k: usize) -> Option<Var> {
        match k {
            0 => Some(self.u),
            1 => self.u_x,
            2 => self.u_xx,
            3 => self.u_xxx,
            _ => None,
        }
    }
}

/// A periodic benchmark problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub kind: ProblemKind,
    pub x_lo: f64,
    pub x_hi: f64,
    pub max_x_order: usize,
    /// Orders `k` whose values must agree at both ends: `u^(k)(x_lo) = u^(k)(x_hi)`.
    pub match_orders: Vec<usize>,
    /// Convection speed.
    pub beta: f64,
    /// Allen-Cahn diffusivity.
    pub diffusivity: f64,
    /// Allen-Cahn reaction strength.
    pub reaction: f64,
    /// KdV dispersion coefficient.
    pub dispersion: f64,
}

fn missing(order: &str, kind: ProblemKind) -> Error {
    Error::Config(format!("{kind} residual needs {order}, which was not computed"))
}

impl Problem {
    pub fn new(kind: ProblemKind) -> Self {
        let (x_lo, x_hi, max_x_order, match_orders) = match kind {
            ProblemKind::Convection => (0.0, TAU, 1, vec![0]),
            ProblemKind::AllenCahn => (-1.0, 1.0, 2, vec![0, 1]),
            ProblemKind::Kdv => (-1.0, 1.0, 3, vec![0, 1]),
        };
        Problem {
            kind,
            x_lo,
            x_hi,
            max_x_order,
            match_orders,
            beta: 40.0,
            diffusivity: 1e-4,
            reaction: 5.0,
            dispersion: 0.0025,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        Ok(Problem::new(name.parse()?))
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn period(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    pub fn contains_x(&self, x: f64) -> bool {
        x >= self.x_lo && x <= self.x_hi
    }

    pub fn initial_condition(&self, x: f64) -> f64 {
        match self.kind {
            ProblemKind::Convection => x.sin(),
            ProblemKind::AllenCahn => x * x * (PI * x).cos(),
            ProblemKind::Kdv => (PI * x).cos(),
        }
    }

    pub fn has_exact_solution(&self) -> bool {
        self.kind == ProblemKind::Convection
    }

    /// `sin(x - beta t)` for convection.
    pub fn exact_solution(&self, x: f64, t: f64) -> Result<f64> {
        match self.kind {
            ProblemKind::Convection => Ok((x - self.beta * t).sin()),
            _ => Err(Error::NoExactSolution(self.name().into())),
        }
    }

    /// Exact convection bundle, for residual checks.
    pub fn exact_bundle(&self, x: f64, t: f64) -> Result<DerivativeBundle> {
        let u = self.exact_solution(x, t)?;
        let c = (x - self.beta * t).cos();
        Ok(DerivativeBundle {
            u,
            u_t: -self.beta * c,
            u_x: c,
            u_xx: Some(-u),
            u_xxx: Some(-c),
        })
    }

    /// Pointwise residual `u_t + P(u)`.
    pub fn residual(&self, b: &DerivativeBundle) -> Result<f64> {
        Ok(match self.kind {
            ProblemKind::Convection => b.u_t + self.beta * b.u_x,
            ProblemKind::AllenCahn => {
                let u_xx = b.u_xx.ok_or_else(|| missing("u_xx", self.kind))?;
                b.u_t - self.diffusivity * u_xx + self.reaction * (b.u * b.u * b.u - b.u)
            }
            ProblemKind::Kdv => {
                let u_xxx = b.u_xxx.ok_or_else(|| missing("u_xxx", self.kind))?;
                b.u_t + b.u * b.u_x + self.dispersion * u_xxx
            }
        })
    }

    /// Batched residual recorded on a tape, one entry per point.
    pub fn residual_on_tape<T: Real>(&self, tape: &mut Tape<T>, f: &FieldChannels) -> Result<Var> {
        let u_t = f.u_t.ok_or_else(|| missing("u_t", self.kind))?;
        let u_x = f.u_x.ok_or_else(|| missing("u_x", self.kind))?;
        Ok(match self.kind {
            ProblemKind::Convection => {
                let adv = tape.scale(u_x, T::of(self.beta));
                tape.add(u_t, adv)
            }
            ProblemKind::AllenCahn => {
                let u_xx = f.u_xx.ok_or_else(|| missing("u_xx", self.kind))?;
                let diff = tape.scale(u_xx, T::of(-self.diffusivity));
                let cube = tape.powi(f.u, 3);
                let react = tape.sub(cube, f.u);
                let react = tape.scale(react, T::of(self.reaction));
                let r = tape.add(u_t, diff);
                tape.add(r, react)
            }
            ProblemKind::Kdv => {
                let u_xxx = f.u_xxx.ok_or_else(|| missing("u_xxx", self.kind))?;
                let adv = tape.mul(f.u, u_x);
                let disp = tape.scale(u_xxx, T::of(self.dispersion));
                let r = tape.add(u_t, adv);
                tape.add(r, disp)
            }
        })
    }

    /// Periodic mismatches `u^(k)(x_lo, t) - u^(k)(x_hi, t)` for every matched order.
    pub fn boundary_residuals(
        &self,
        evaluate: impl Fn(f64, f64) -> Result<DerivativeBundle>,
        t: f64,
    ) -> Result<Vec<f64>> {
        let lo = evaluate(self.x_lo, t)?;
        let hi = evaluate(self.x_hi, t)?;
        self.match_orders
            .iter()
            .map(|&k| {
                let a = lo.x_derivative(k).ok_or_else(|| missing("boundary derivative", self.kind))?;
                let b = hi.x_derivative(k).ok_or_else(|| missing("boundary derivative", self.kind))?;
                Ok(a - b)
            })
            .collect()
    }

    /// Network architecture defaults: Fourier 4x40 for convection and
    /// Allen-Cahn, fully connected 3x50 for KdV.
    pub fn default_architecture(&self) -> (usize, usize, Embedding) {
        match self.kind {
            ProblemKind::Convection | ProblemKind::AllenCahn => (
                4,
                40,
                Embedding::Fourier {
                    modes: 10,
                    period: self.period(),
                },
            ),
            ProblemKind::Kdv => (3, 50, Embedding::Raw),
        }
    }

    pub fn default_weights(&self) -> LossWeights {
        let initial = match self.kind {
            ProblemKind::AllenCahn => 100.0,
            _ => 1.0,
        };
        LossWeights {
            initial,
            boundary: 1.0,
            residual: 1.0,
        }
    }
}
