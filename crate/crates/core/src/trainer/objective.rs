use serde::{Deserialize, Serialize};

use super::loss::{LossModel, LossTerms, Term};
use crate::diff::Tape;
use crate::error::Result;
use crate::real::Real;

/// Floating-point width used to evaluate losses. Optimizer state is always
/// 64-bit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

impl std::str::FromStr for Precision {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f64" => Ok(Precision::F64),
            "f32" => Ok(Precision::F32),
            other => Err(crate::Error::Config(format!("precision must be f64 or f32 (got `{other}`)"))),
        }
    }
}

/// Anything an optimizer can minimize.
pub trait Objective {
    fn dim(&self) -> usize;
    /// Loss and gradient at `params`.
    fn eval(&self, params: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// Wraps a closure returning loss and gradient.
pub struct FnObjective<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>> Objective for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        (self.f)(params)
    }
}

/// One evaluation of a [`LossModel`].
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub loss: f64,
    pub terms: LossTerms,
    pub grad: Option<Vec<f64>>,
}

/// Binds a loss model to a precision.
pub struct TapeObjective<'a, L> {
    pub model: &'a L,
    pub precision: Precision,
}

impl<'a, L: LossModel> TapeObjective<'a, L> {
    pub fn new(model: &'a L, precision: Precision) -> Self {
        TapeObjective { model, precision }
    }

    pub fn evaluate(&self, params: &[f64], with_grad: bool) -> Result<Evaluation> {
        match self.precision {
            Precision::F64 => evaluate_model::<f64, L>(self.model, params, with_grad),
            Precision::F32 => evaluate_model::<f32, L>(self.model, params, with_grad),
        }
    }
}

impl<L: LossModel> Objective for TapeObjective<'_, L> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn eval(&self, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        let e = self.evaluate(params, true)?;
        Ok((e.loss, e.grad.expect("gradient requested")))
    }
}

struct PartResult {
    loss: f64,
    terms: LossTerms,
    grad: Option<Vec<f64>>,
}

fn evaluate_part<T: Real, L: LossModel>(model: &L, params: &[f64], part: usize, with_grad: bool) -> Result<PartResult> {
    let w = model.weights();
    let mut tape = Tape::<T>::new();
    let cast: Vec<T> = params.iter().map(|&v| T::of(v)).collect();
    let theta = if with_grad {
        tape.input_vector(&cast)
    } else {
        tape.constant_vector(&cast)
    };
    let contributions = model.record(&mut tape, theta, part)?;
    let mut terms = LossTerms::default();
    let mut total = None;
    for (term, var) in contributions {
        terms.add(term, tape.scalar(var).as_f64());
        let weight = match term {
            Term::Initial => w.initial,
            Term::Boundary => w.boundary,
            Term::Residual => w.residual,
        };
        let scaled = tape.scale(var, T::of(weight));
        total = Some(match total {
            None => scaled,
            Some(acc) => tape.add(acc, scaled),
        });
    }
    let Some(total) = total else {
        return Ok(PartResult {
            loss: 0.0,
            terms,
            grad: with_grad.then(|| vec![0.0; params.len()]),
        });
    };
    let loss = tape.scalar(total).as_f64();
    let grad = if with_grad {
        Some(tape.gradient(total, theta)?.iter().map(|g| g.as_f64()).collect())
    } else {
        None
    };
    Ok(PartResult { loss, terms, grad })
}

fn run_parts<T: Real, L: LossModel>(model: &L, params: &[f64], with_grad: bool) -> Vec<Result<PartResult>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..model.parts())
            .into_par_iter()
            .map(|p| evaluate_part::<T, L>(model, params, p, with_grad))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..model.parts())
            .map(|p| evaluate_part::<T, L>(model, params, p, with_grad))
            .collect()
    }
}

/// Evaluates every part and reduces in part order.
pub fn evaluate_model<T: Real, L: LossModel>(model: &L, params: &[f64], with_grad: bool) -> Result<Evaluation> {
    let mut out = Evaluation {
        loss: 0.0,
        terms: LossTerms::default(),
        grad: with_grad.then(|| vec![0.0; params.len()]),
    };
    for part in run_parts::<T, L>(model, params, with_grad) {
        let part = part?;
        out.loss += part.loss;
        out.terms.initial += part.terms.initial;
        out.terms.boundary += part.terms.boundary;
        out.terms.residual += part.terms.residual;
        if let (Some(acc), Some(g)) = (out.grad.as_mut(), part.grad) {
            for (a, v) in acc.iter_mut().zip(g) {
                *a += v;
            }
        }
    }
    Ok(out)
}
