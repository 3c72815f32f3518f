//! Influence functions `lambda(t, p)` and their adjoints `eta = 1 - lambda`.
//!
//! On `[t_start, p]` the influence decays from 1 to 0 along one of three
//! profiles of `s = (t - t_start) / (p - t_start)`; for `t > p` it is clamped
//! to 0 with vanishing derivatives. The transition time `p` is either fixed or
//! driven by an unconstrained parameter `rho` through a sigmoid.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Decay profile of the influence function.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `cos^2(pi s / 2)`
    Trig,
    /// `2 s^3 - 3 s^2 + 1`
    #[default]
    Cubic,
    /// `-6 s^5 + 15 s^4 - 10 s^3 + 1`; also flat in the second derivative.
    Quintic,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Trig, Family::Cubic, Family::Quintic];

    /// Profile value and its first two derivatives in `s`.
    pub fn profile(self, s: f64) -> (f64, f64, f64) {
        match self {
            Family::Trig => {
                let (sn, cs) = (PI * s).sin_cos();
                (0.5 * (1.0 + cs), -0.5 * PI * sn, -0.5 * PI * PI * cs)
            }
            Family::Cubic => (
                (2.0 * s - 3.0) * s * s + 1.0,
                6.0 * s * (s - 1.0),
                12.0 * s - 6.0,
            ),
            Family::Quintic => {
                let s2 = s * s;
                (
                    ((-6.0 * s + 15.0) * s - 10.0) * s2 * s + 1.0,
                    -30.0 * s2 * (s - 1.0) * (s - 1.0),
                    -60.0 * s * (s - 1.0) * (2.0 * s - 1.0),
                )
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Trig => "trig",
            Family::Cubic => "cubic",
            Family::Quintic => "quintic",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trig" => Ok(Family::Trig),
            "cubic" => Ok(Family::Cubic),
            "quintic" => Ok(Family::Quintic),
            other => Err(Error::Config(format!("unknown influence family `{other}`"))),
        }
    }
}

/// How the transition time `p` is determined.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PMode {
    Fixed { p: f64 },
    /// `p = t_start + dt (eps + (1 - eps) sigmoid(rho))`.
    Trainable { rho: f64, epsilon: f64 },
}

pub const DEFAULT_EPSILON: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfluenceSpec {
    pub family: Family,
    pub t_start: f64,
    pub t_end: f64,
    pub p_mode: PMode,
}

/// Influence and adjoint weights with their time and `p` derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InfluenceBundle {
    pub lambda: f64,
    pub eta: f64,
    pub dlambda_dt: f64,
    pub deta_dt: f64,
    pub dlambda_dp: f64,
    pub deta_dp: f64,
    /// Mixed derivative `d^2 lambda / (dt dp)`, needed to differentiate
    /// `u_t` of the blended field with respect to `p`.
    pub d2lambda_dtdp: f64,
}

impl InfluenceBundle {
    fn clamped() -> Self {
        InfluenceBundle {
            lambda: 0.0,
            eta: 1.0,
            dlambda_dt: 0.0,
            deta_dt: 0.0,
            dlambda_dp: 0.0,
            deta_dp: 0.0,
            d2lambda_dtdp: 0.0,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Transition time for a reparameterized `rho`.
pub fn reparam_p(rho: f64, t_start: f64, t_end: f64, epsilon: f64) -> f64 {
    t_start + (t_end - t_start) * (epsilon + (1.0 - epsilon) * sigmoid(rho))
}

/// Inverse of [`reparam_p`].
pub fn inverse_reparam(p: f64, t_start: f64, t_end: f64, epsilon: f64) -> Result<f64> {
    let frac = (p - t_start) / (t_end - t_start);
    let sig = (frac - epsilon) / (1.0 - epsilon);
    if !(sig > 0.0 && sig < 1.0) {
        return Err(Error::Domain(format!(
            "p = {p} is not reachable inside ({}, {t_end}) with margin {epsilon}",
            t_start + epsilon * (t_end - t_start)
        )));
    }
    Ok((sig / (1.0 - sig)).ln())
}

impl InfluenceSpec {
    pub fn fixed(family: Family, t_start: f64, t_end: f64, p: f64) -> Result<Self> {
        let spec = InfluenceSpec {
            family,
            t_start,
            t_end,
            p_mode: PMode::Fixed { p },
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Trainable transition time initialized at the interval midpoint.
    pub fn trainable_midpoint(family: Family, t_start: f64, t_end: f64, epsilon: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&epsilon) {
            return Err(Error::Config(format!("epsilon must lie in [0, 0.5) (got {epsilon})")));
        }
        let mid = 0.5 * (t_start + t_end);
        let rho = inverse_reparam(mid, t_start, t_end, epsilon)?;
        let spec = InfluenceSpec {
            family,
            t_start,
            t_end,
            p_mode: PMode::Trainable { rho, epsilon },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_start < self.t_end) {
            return Err(Error::Config(format!(
                "influence interval [{}, {}] is empty",
                self.t_start, self.t_end
            )));
        }
        match self.p_mode {
            PMode::Fixed { p } => {
                if !(p > self.t_start && p <= self.t_end) {
                    return Err(Error::Config(format!(
                        "fixed p = {p} outside ({}, {}]",
                        self.t_start, self.t_end
                    )));
                }
            }
            PMode::Trainable { rho, epsilon } => {
                if !rho.is_finite() || !(0.0..1.0).contains(&epsilon) {
                    return Err(Error::Config(format!(
                        "invalid trainable p (rho = {rho}, epsilon = {epsilon})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn is_trainable(&self) -> bool {
        matches!(self.p_mode, PMode::Trainable { .. })
    }

    pub fn p(&self) -> f64 {
        match self.p_mode {
            PMode::Fixed { p } => p,
            PMode::Trainable { rho, epsilon } => reparam_p(rho, self.t_start, self.t_end, epsilon),
        }
    }

    /// `dp / drho`; zero for a fixed `p`.
    pub fn dp_drho(&self) -> f64 {
        match self.p_mode {
            PMode::Fixed { .. } => 0.0,
            PMode::Trainable { rho, epsilon } => {
                let s = sigmoid(rho);
                (self.t_end - self.t_start) * (1.0 - epsilon) * s * (1.0 - s)
            }
        }
    }

    /// Same spec with a new `rho` (trainable only).
    pub fn with_rho(&self, rho: f64) -> Self {
        let mut out = *self;
        if let PMode::Trainable { epsilon, .. } = self.p_mode {
            out.p_mode = PMode::Trainable { rho, epsilon };
        }
        out
    }

    /// Freezes the current `p`.
    pub fn frozen(&self) -> Self {
        InfluenceSpec {
            p_mode: PMode::Fixed { p: self.p() },
            ..*self
        }
    }

    pub fn bundle(&self, t: f64) -> Result<InfluenceBundle> {
        influence_bundle(self, t)
    }
}

/// Evaluates `lambda`, `eta` and their derivatives at `t >= t_start`.
///
/// Past `p` the clamped branch applies; at the kink `t = p` the smooth branch
/// is used, whose value and first derivative already vanish there.
pub fn influence_bundle(spec: &InfluenceSpec, t: f64) -> Result<InfluenceBundle> {
    if t < spec.t_start {
        return Err(Error::Domain(format!(
            "influence evaluated at t = {t} before interval start {}",
            spec.t_start
        )));
    }
    let p = spec.p();
    if t > p {
        return Ok(InfluenceBundle::clamped());
    }
    let d = p - spec.t_start;
    let s = (t - spec.t_start) / d;
    let (g, g1, g2) = spec.family.profile(s);
    let dlambda_dt = g1 / d;
    let (dlambda_dp, d2) = if spec.is_trainable() {
        (-g1 * s / d, -(s * g2 + g1) / (d * d))
    } else {
        (0.0, 0.0)
    };
    Ok(InfluenceBundle {
        lambda: g,
        eta: 1.0 - g,
        dlambda_dt,
        deta_dt: -dlambda_dt,
        dlambda_dp,
        deta_dp: -dlambda_dp,
        d2lambda_dtdp: d2,
    })
}

/// Outcome of one numerical condition check.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub passed: bool,
    pub violation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionReport {
    pub checks: Vec<ConditionCheck>,
}

impl ConditionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn worst_violation(&self) -> f64 {
        self.checks.iter().map(|c| c.violation).fold(0.0, f64::max)
    }
}

/// Default pass threshold for [`verify_conditions`].
pub const CONDITION_TOLERANCE: f64 = 1e-10;

/// Checks the continuity/smoothness conditions of an influence spec:
/// `lambda(t_start) = 1`, `lambda'(t_start) = 0`, `lambda(p) = 0`,
/// `lambda'(p) = 0`, monotone decay on `[t_start, p]`, and for the quintic
/// family `lambda''` vanishing at both ends.
pub fn verify_conditions(spec: &InfluenceSpec) -> ConditionReport {
    let a = spec.t_start;
    let p = spec.p();
    let d = p - a;
    let family = spec.family;
    let profile = move |t: f64| {
        let (g, g1, g2) = family.profile((t - a) / d);
        (g, g1 / d, g2 / (d * d))
    };
    verify_profile(a, p, profile, family == Family::Quintic, CONDITION_TOLERANCE)
}

/// Condition checks for an arbitrary profile `t -> (lambda, lambda', lambda'')`
/// on `[t_start, p]`.
pub fn verify_profile(
    t_start: f64,
    p: f64,
    profile: impl Fn(f64) -> (f64, f64, f64),
    second_order: bool,
    tolerance: f64,
) -> ConditionReport {
    let (l0, d0, s0) = profile(t_start);
    let (l1, d1, s1) = profile(p);
    let grid = 1001;
    let mut prev = l0;
    let mut rise: f64 = 0.0;
    for j in 1..grid {
        let t = t_start + (p - t_start) * j as f64 / (grid - 1) as f64;
        let (l, _, _) = profile(t);
        rise = rise.max(l - prev);
        prev = l;
    }
    let mut checks = vec![
        ("start_value", (l0 - 1.0).abs()),
        ("start_slope", d0.abs()),
        ("end_value", l1.abs()),
        ("end_slope", d1.abs()),
        ("monotone", rise.max(0.0)),
    ];
    if second_order {
        checks.push(("start_curvature", s0.abs()));
        checks.push(("end_curvature", s1.abs()));
    }
    ConditionReport {
        checks: checks
            .into_iter()
            .map(|(name, violation)| ConditionCheck {
                name,
                passed: violation <= tolerance,
                violation,
            })
            .collect(),
    }
}
