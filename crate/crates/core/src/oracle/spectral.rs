use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::grid::ReferenceGrid;
use crate::error::{Error, Result};
use crate::problem::{Problem, ProblemKind};

/// Settings for [`solve_spectral`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralConfig {
    pub nx: usize,
    /// Largest allowed step; the actual step divides the frame spacing.
    pub dt: f64,
    pub t_end: f64,
    /// Output frames including `t = 0`.
    pub frames: usize,
}

impl SpectralConfig {
    pub fn new(nx: usize, dt: f64, t_end: f64) -> Self {
        SpectralConfig {
            nx,
            dt,
            t_end,
            frames: 201,
        }
    }
}

/// Points of the contour used to evaluate the phi-functions without
/// cancellation.
const CONTOUR: usize = 64;

struct Etdrk4 {
    e: Vec<Complex64>,
    e2: Vec<Complex64>,
    q: Vec<Complex64>,
    f1: Vec<Complex64>,
    f2: Vec<Complex64>,
    f3: Vec<Complex64>,
}

impl Etdrk4 {
    /// Coefficients for step `h` and linear symbol `l`, by contour averages
    /// on a unit circle around each `h l`.
    fn new(l: &[Complex64], h: f64) -> Self {
        let roots: Vec<Complex64> = (0..CONTOUR)
            .map(|j| Complex64::from_polar(1.0, 2.0 * PI * (j as f64 + 0.5) / CONTOUR as f64))
            .collect();
        let m = CONTOUR as f64;
        let n = l.len();
        let mut c = Etdrk4 {
            e: Vec::with_capacity(n),
            e2: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
            f1: Vec::with_capacity(n),
            f2: Vec::with_capacity(n),
            f3: Vec::with_capacity(n),
        };
        for &lk in l {
            let hl = lk * h;
            c.e.push(hl.exp());
            c.e2.push((hl * 0.5).exp());
            let (mut q, mut f1, mut f2, mut f3) = (Complex64::ZERO, Complex64::ZERO, Complex64::ZERO, Complex64::ZERO);
            for &r in &roots {
                let z = hl + r;
                let ez = z.exp();
                let z3 = z * z * z;
                q += ((z * 0.5).exp() - 1.0) / z;
                f1 += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
                f2 += (2.0 + z + ez * (z - 2.0)) / z3;
                f3 += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
            }
            c.q.push(q * (h / m));
            c.f1.push(f1 * (h / m));
            c.f2.push(f2 * (h / m));
            c.f3.push(f3 * (h / m));
        }
        c
    }
}

/// Nonlinear part in Fourier space with two-thirds dealiasing.
struct Nonlinear {
    kind: ProblemKind,
    /// `i k` with the Nyquist mode zeroed.
    ik: Vec<Complex64>,
    keep: Vec<bool>,
    reaction: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
}

impl Nonlinear {
    fn eval(&mut self, v: &[Complex64], out: &mut [Complex64]) {
        let n = v.len();
        match self.kind {
            ProblemKind::Convection => {
                out.fill(Complex64::ZERO);
                return;
            }
            _ => {}
        }
        self.buf.copy_from_slice(v);
        self.inv.process(&mut self.buf);
        let scale = 1.0 / n as f64;
        for z in self.buf.iter_mut() {
            let u = z.re * scale;
            let p = match self.kind {
                ProblemKind::AllenCahn => -self.reaction * u * u * u,
                _ => u * u,
            };
            *z = Complex64::new(p, 0.0);
        }
        self.fwd.process(&mut self.buf);
        for k in 0..n {
            out[k] = if !self.keep[k] {
                Complex64::ZERO
            } else if self.kind == ProblemKind::Kdv {
                // -(u^2 / 2)_x
                -0.5 * self.ik[k] * self.buf[k]
            } else {
                self.buf[k]
            };
        }
    }
}

/// Fourier pseudospectral solution with fourth-order exponential time
/// differencing (ETDRK4) for the stiff linear part.
///
/// Convection uses `L = -i beta k`, Allen-Cahn `L = -d k^2 + r` with
/// `N = -r u^3`, KdV `L = i c k^3` with `N = -(u^2 / 2)_x`.
pub fn solve_spectral(problem: &Problem, cfg: &SpectralConfig) -> Result<ReferenceGrid> {
    let n = cfg.nx;
    if n < 256 || !n.is_power_of_two() {
        return Err(Error::Config(format!("nx must be a power of two >= 256 (got {n})")));
    }
    if !(cfg.dt > 0.0 && cfg.t_end > 0.0 && cfg.frames >= 2) {
        return Err(Error::Config(format!("invalid spectral settings {cfg:?}")));
    }
    let period = problem.period();
    let frame_dt = cfg.t_end / (cfg.frames - 1) as f64;
    let substeps = (frame_dt / cfg.dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let h = frame_dt / substeps as f64;

    let base = 2.0 * PI / period;
    let half = n / 2;
    let wave = |m: usize| if m < half { m as f64 } else { m as f64 - n as f64 };
    // odd-order symbols vanish at the Nyquist mode
    let k_odd: Vec<f64> = (0..n).map(|m| if m == half { 0.0 } else { base * wave(m) }).collect();
    let k_even: Vec<f64> = (0..n).map(|m| base * wave(m).abs()).collect();
    let l: Vec<Complex64> = (0..n)
        .map(|m| match problem.kind {
            ProblemKind::Convection => Complex64::new(0.0, -problem.beta * k_odd[m]),
            ProblemKind::AllenCahn => Complex64::new(-problem.diffusivity * k_even[m] * k_even[m] + problem.reaction, 0.0),
            ProblemKind::Kdv => Complex64::new(0.0, problem.dispersion * k_odd[m].powi(3)),
        })
        .collect();
    let coef = Etdrk4::new(&l, h);

    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let cutoff = n / 3;
    let mut nl = Nonlinear {
        kind: problem.kind,
        ik: k_odd.iter().map(|&k| Complex64::new(0.0, k)).collect(),
        keep: (0..n).map(|m| wave(m).abs() <= cutoff as f64).collect(),
        reaction: problem.reaction,
        fwd: fwd.clone(),
        inv: inv.clone(),
        buf: vec![Complex64::ZERO; n],
    };

    let dx = period / n as f64;
    let u0: Vec<f64> = (0..n).map(|j| problem.initial_condition(problem.x_lo + j as f64 * dx)).collect();
    let mut v: Vec<Complex64> = u0.iter().map(|&u| Complex64::new(u, 0.0)).collect();
    fwd.process(&mut v);

    let mut values = Array2::<f64>::zeros((cfg.frames, n));
    values.row_mut(0).assign(&ndarray::ArrayView1::from(&u0));
    let z = || vec![Complex64::ZERO; n];
    let (mut nv, mut a, mut na, mut b, mut nb, mut c, mut nc) = (z(), z(), z(), z(), z(), z(), z());
    let mut phys = z();
    let mut step = 0;
    for frame in 1..cfg.frames {
        for _ in 0..substeps {
            step += 1;
            nl.eval(&v, &mut nv);
            for k in 0..n {
                a[k] = coef.e2[k] * v[k] + coef.q[k] * nv[k];
            }
            nl.eval(&a, &mut na);
            for k in 0..n {
                b[k] = coef.e2[k] * v[k] + coef.q[k] * na[k];
            }
            nl.eval(&b, &mut nb);
            for k in 0..n {
                c[k] = coef.e2[k] * a[k] + coef.q[k] * (2.0 * nb[k] - nv[k]);
            }
            nl.eval(&c, &mut nc);
            let mut finite = true;
            for k in 0..n {
                v[k] = coef.e[k] * v[k]
                    + nv[k] * coef.f1[k]
                    + 2.0 * (na[k] + nb[k]) * coef.f2[k]
                    + nc[k] * coef.f3[k];
                finite &= v[k].re.is_finite() && v[k].im.is_finite();
            }
            if !finite {
                return Err(Error::Instability {
                    step,
                    time: step as f64 * h,
                });
            }
        }
        phys.copy_from_slice(&v);
        inv.process(&mut phys);
        let scale = 1.0 / n as f64;
        for (dst, z) in values.row_mut(frame).iter_mut().zip(&phys) {
            *dst = z.re * scale;
        }
    }
    let mut grid = ReferenceGrid::new((problem.x_lo, problem.x_hi), (0.0, cfg.t_end), values)?;
    grid.metadata = vec![
        ("problem".into(), problem.name().into()),
        ("nx".into(), n.to_string()),
        ("dt".into(), format!("{h:e}")),
        ("solver".into(), "fourier-etdrk4".into()),
    ];
    Ok(grid)
}

/// `sum_j u_j dx` of every frame.
pub fn frame_masses(grid: &ReferenceGrid) -> Vec<f64> {
    let dx = grid.dx();
    grid.values.rows().into_iter().map(|r| r.sum() * dx).collect()
}
