use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Tape, Var};
use crate::error::{Error, Result};
use crate::real::Real;

/// Loss value and exact reverse-mode gradient.
///
/// `loss` receives a fresh tape and the parameter leaf (an `n x 1` column) and
/// returns the `1 x 1` loss node.
pub fn loss_gradient<T, F>(loss: F, params: &[f64]) -> Result<(f64, Vec<f64>)>
where
    T: Real,
    F: Fn(&mut Tape<T>, Var) -> Result<Var>,
{
    let mut tape = Tape::<T>::new();
    let cast: Vec<T> = params.iter().map(|&v| T::of(v)).collect();
    let theta = tape.input_vector(&cast);
    let out = loss(&mut tape, theta)?;
    let value = tape.scalar(out).as_f64();
    let grad = tape.gradient(out, theta)?;
    Ok((value, grad.iter().map(|g| g.as_f64()).collect()))
}

/// Loss value only; nothing is differentiated.
pub fn loss_value<T, F>(loss: F, params: &[f64]) -> Result<f64>
where
    T: Real,
    F: Fn(&mut Tape<T>, Var) -> Result<Var>,
{
    let mut tape = Tape::<T>::new();
    let cast: Vec<T> = params.iter().map(|&v| T::of(v)).collect();
    let theta = tape.constant_vector(&cast);
    let out = loss(&mut tape, theta)?;
    Ok(tape.scalar(out).as_f64())
}

/// Worst relative deviation between the reverse-mode gradient and central
/// differences on `sample_count` randomly chosen coordinates.
///
/// The step for coordinate `i` is `step * max(1, |theta_i|)`; deviations are
/// relative to `max(|g_fd|, 1e-12)`.
pub fn finite_difference_check<F>(
    loss: F,
    params: &[f64],
    step: f64,
    sample_count: usize,
    seed: u64,
) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, Var) -> Result<Var>,
{
    if !(step > 0.0) {
        return Err(Error::Config(format!("finite-difference step must be > 0 (got {step})")));
    }
    if sample_count > params.len() {
        return Err(Error::Config(format!(
            "cannot sample {sample_count} of {} coordinates",
            params.len()
        )));
    }
    let (_, grad) = loss_gradient::<f64, _>(&loss, params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = params.to_vec();
    let mut worst: f64 = 0.0;
    for i in sample(&mut rng, params.len(), sample_count) {
        let h = step * params[i].abs().max(1.0);
        probe[i] = params[i] + h;
        let up = loss_value::<f64, _>(&loss, &probe)?;
        probe[i] = params[i] - h;
        let down = loss_value::<f64, _>(&loss, &probe)?;
        probe[i] = params[i];
        let fd = (up - down) / (2.0 * h);
        let dev = (grad[i] - fd).abs() / fd.abs().max(1e-12);
        worst = worst.max(dev);
    }
    Ok(worst)
}
