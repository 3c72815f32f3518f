use ndarray::{s, Array2, Axis};

use super::JetLayout;
use crate::error::{Error, Result};
use crate::real::Real;

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Vector-Jacobian product of a custom node: maps the output adjoint to one
/// adjoint per input, in input order.
pub type Vjp<T> = Box<dyn Fn(&Array2<T>) -> Vec<Array2<T>> + Send + Sync>;

enum Op<T> {
    Input,
    Constant,
    View {
        src: Var,
        offset: usize,
    },
    JetLinear {
        input: Var,
        weight: Var,
        bias: Var,
        points: usize,
    },
    TanhJet {
        input: Var,
        layout: JetLayout,
        points: usize,
    },
    Channel {
        src: Var,
        index: usize,
        points: usize,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Shift(Var),
    Tanh(Var),
    Sin(Var),
    Cos(Var),
    Powi(Var, i32),
    Sigmoid(Var),
    MeanSquare(Var),
    Sum(Var),
    Custom {
        name: &'static str,
        inputs: Vec<Var>,
        vjp: Option<Vjp<T>>,
    },
}

struct Node<T> {
    value: Array2<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Reverse-mode tape over dense 2-D arrays.
///
/// Every value is an `Array2`; scalars are `1 x 1` and per-point quantities are
/// `n x 1` columns. Elementwise binary ops broadcast a `1 x 1` operand. Network
/// layers work on stacked jets: a `(channels * points) x width` matrix whose
/// row blocks hold the value and each propagated derivative channel.
pub struct Tape<T: Real> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array2<T> {
        &self.nodes[v.0].value
    }

    /// Value of a `1 x 1` node.
    pub fn scalar(&self, v: Var) -> T {
        let a = self.value(v);
        debug_assert_eq!(a.dim(), (1, 1));
        a[[0, 0]]
    }

    pub fn needs_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, value: Array2<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn grad_of(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    /// Differentiable leaf.
    pub fn input(&mut self, value: Array2<T>) -> Var {
        self.push(value, Op::Input, true)
    }

    /// Differentiable leaf holding a flat vector as an `n x 1` column.
    pub fn input_vector(&mut self, values: &[T]) -> Var {
        let col = Array2::from_shape_vec((values.len(), 1), values.to_vec()).expect("column");
        self.input(col)
    }

    pub fn constant(&mut self, value: Array2<T>) -> Var {
        self.push(value, Op::Constant, false)
    }

    pub fn constant_vector(&mut self, values: &[T]) -> Var {
        let col = Array2::from_shape_vec((values.len(), 1), values.to_vec()).expect("column");
        self.constant(col)
    }

    pub fn constant_scalar(&mut self, v: T) -> Var {
        self.constant(Array2::from_elem((1, 1), v))
    }

    /// Reads `rows * cols` consecutive entries of a flat column, row-major.
    pub fn view(&mut self, src: Var, offset: usize, rows: usize, cols: usize) -> Var {
        let flat = &self.nodes[src.0].value;
        assert_eq!(flat.ncols(), 1, "view source must be a column");
        assert!(offset + rows * cols <= flat.nrows(), "view out of bounds");
        let data: Vec<T> = flat
            .slice(s![offset..offset + rows * cols, 0])
            .iter()
            .copied()
            .collect();
        let value = Array2::from_shape_vec((rows, cols), data).expect("view shape");
        let g = self.grad_of(&[src]);
        self.push(value, Op::View { src, offset }, g)
    }

    /// Affine map applied to every jet channel: `Z = A Wᵀ`, with the bias added
    /// to the value block (first `points` rows) only, since derivatives of a
    /// constant vanish.
    pub fn jet_linear(&mut self, input: Var, weight: Var, bias: Var, points: usize) -> Var {
        let a = &self.nodes[input.0].value;
        let w = &self.nodes[weight.0].value;
        let b = &self.nodes[bias.0].value;
        assert_eq!(a.ncols(), w.ncols(), "jet_linear fan-in mismatch");
        assert_eq!(b.dim(), (1, w.nrows()), "jet_linear bias shape");
        assert_eq!(a.nrows() % points, 0, "jet rows not a multiple of points");
        let mut z = a.dot(&w.t());
        {
            let mut head = z.slice_mut(s![0..points, ..]);
            head += &b.row(0);
        }
        let g = self.grad_of(&[input, weight, bias]);
        self.push(
            z,
            Op::JetLinear {
                input,
                weight,
                bias,
                points,
            },
            g,
        )
    }

    /// `tanh` applied to a stacked jet, propagating every derivative channel
    /// through the chain rule.
    pub fn tanh_jet(&mut self, input: Var, layout: JetLayout, points: usize) -> Var {
        let z = &self.nodes[input.0].value;
        assert_eq!(z.nrows(), layout.channels() * points, "tanh_jet row count");
        let y = tanh_jet_forward(z, layout, points);
        let g = self.grad_of(&[input]);
        self.push(
            y,
            Op::TanhJet {
                input,
                layout,
                points,
            },
            g,
        )
    }

    /// Extracts row block `index` of a stacked single-column jet as `points x 1`.
    pub fn channel(&mut self, src: Var, index: usize, points: usize) -> Var {
        let a = &self.nodes[src.0].value;
        assert_eq!(a.ncols(), 1, "channel source must be a column");
        assert!((index + 1) * points <= a.nrows(), "channel out of range");
        let value = a.slice(s![index * points..(index + 1) * points, ..]).to_owned();
        let g = self.grad_of(&[src]);
        self.push(value, Op::Channel { src, index, points }, g)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = broadcast_zip(self.value(a), self.value(b), |x, y| x + y);
        let g = self.grad_of(&[a, b]);
        self.push(value, Op::Add(a, b), g)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = broadcast_zip(self.value(a), self.value(b), |x, y| x - y);
        let g = self.grad_of(&[a, b]);
        self.push(value, Op::Sub(a, b), g)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = broadcast_zip(self.value(a), self.value(b), |x, y| x * y);
        let g = self.grad_of(&[a, b]);
        self.push(value, Op::Mul(a, b), g)
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let value = self.value(a).mapv(|x| x * c);
        let g = self.grad_of(&[a]);
        self.push(value, Op::Scale(a, c), g)
    }

    pub fn shift(&mut self, a: Var, c: T) -> Var {
        let value = self.value(a).mapv(|x| x + c);
        let g = self.grad_of(&[a]);
        self.push(value, Op::Shift(a), g)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(tanh);
        let g = self.grad_of(&[a]);
        self.push(value, Op::Tanh(a), g)
    }

    pub fn sin(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| x.sin());
        let g = self.grad_of(&[a]);
        self.push(value, Op::Sin(a), g)
    }

    pub fn cos(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| x.cos());
        let g = self.grad_of(&[a]);
        self.push(value, Op::Cos(a), g)
    }

    pub fn powi(&mut self, a: Var, n: i32) -> Var {
        let value = self.value(a).mapv(|x| x.powi(n));
        let g = self.grad_of(&[a]);
        self.push(value, Op::Powi(a, n), g)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(sigmoid);
        let g = self.grad_of(&[a]);
        self.push(value, Op::Sigmoid(a), g)
    }

    /// Mean of squared entries, as a `1 x 1` node.
    pub fn mean_square(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let n = T::of(v.len() as f64);
        let ms = v.iter().map(|&x| x * x).sum::<T>() / n;
        let g = self.grad_of(&[a]);
        self.push(Array2::from_elem((1, 1), ms), Op::MeanSquare(a), g)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        let g = self.grad_of(&[a]);
        self.push(Array2::from_elem((1, 1), s), Op::Sum(a), g)
    }

    /// Records a node whose value was computed outside the tape. Without a
    /// `vjp` the node is opaque: asking for a gradient through it fails with
    /// [`Error::Unsupported`].
    pub fn custom(
        &mut self,
        name: &'static str,
        inputs: &[Var],
        value: Array2<T>,
        vjp: Option<Vjp<T>>,
    ) -> Var {
        let g = self.grad_of(inputs);
        self.push(
            value,
            Op::Custom {
                name,
                inputs: inputs.to_vec(),
                vjp,
            },
            g,
        )
    }

    /// Gradient of the scalar `output` with respect to the leaf `wrt`.
    pub fn gradient(&self, output: Var, wrt: Var) -> Result<Array2<T>> {
        let out = self.value(output);
        if out.dim() != (1, 1) {
            return Err(Error::Unsupported(format!(
                "gradient of non-scalar node with shape {:?}",
                out.dim()
            )));
        }
        let wrt_shape = self.value(wrt).raw_dim();
        if !self.nodes[wrt.0].needs_grad || wrt.0 > output.0 {
            return Ok(Array2::zeros(wrt_shape));
        }
        let mut adj: Vec<Option<Array2<T>>> = (0..=output.0).map(|_| None).collect();
        adj[output.0] = Some(Array2::from_elem((1, 1), T::one()));

        for i in (wrt.0 + 1..=output.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            match &node.op {
                Op::Input | Op::Constant => {}
                Op::View { src, offset } => {
                    if self.needs_grad(*src) {
                        let rows = self.value(*src).nrows();
                        let mut full = Array2::zeros((rows, 1));
                        for (k, &gv) in g.iter().enumerate() {
                            full[[offset + k, 0]] = gv;
                        }
                        self.accumulate(&mut adj, *src, full);
                    }
                }
                Op::JetLinear {
                    input,
                    weight,
                    bias,
                    points,
                } => {
                    let a = self.value(*input);
                    let w = self.value(*weight);
                    if self.needs_grad(*input) {
                        self.accumulate(&mut adj, *input, g.dot(w));
                    }
                    if self.needs_grad(*weight) {
                        self.accumulate(&mut adj, *weight, g.t().dot(a));
                    }
                    if self.needs_grad(*bias) {
                        let db = g.slice(s![0..*points, ..]).sum_axis(Axis(0));
                        self.accumulate(&mut adj, *bias, db.insert_axis(Axis(0)));
                    }
                }
                Op::TanhJet {
                    input,
                    layout,
                    points,
                } => {
                    if self.needs_grad(*input) {
                        let dz = tanh_jet_backward(
                            self.value(*input),
                            &node.value,
                            &g,
                            *layout,
                            *points,
                        );
                        self.accumulate(&mut adj, *input, dz);
                    }
                }
                Op::Channel { src, index, points } => {
                    if self.needs_grad(*src) {
                        let rows = self.value(*src).nrows();
                        let mut full = Array2::zeros((rows, 1));
                        full.slice_mut(s![index * points..(index + 1) * points, ..])
                            .assign(&g);
                        self.accumulate(&mut adj, *src, full);
                    }
                }
                Op::Add(a, b) => {
                    if self.needs_grad(*a) {
                        self.accumulate(&mut adj, *a, g.clone());
                    }
                    if self.needs_grad(*b) {
                        self.accumulate(&mut adj, *b, g);
                    }
                }
                Op::Sub(a, b) => {
                    if self.needs_grad(*a) {
                        self.accumulate(&mut adj, *a, g.clone());
                    }
                    if self.needs_grad(*b) {
                        self.accumulate(&mut adj, *b, g.mapv(|x| -x));
                    }
                }
                Op::Mul(a, b) => {
                    if self.needs_grad(*a) {
                        let ga = broadcast_zip(&g, self.value(*b), |x, y| x * y);
                        self.accumulate(&mut adj, *a, ga);
                    }
                    if self.needs_grad(*b) {
                        let gb = broadcast_zip(&g, self.value(*a), |x, y| x * y);
                        self.accumulate(&mut adj, *b, gb);
                    }
                }
                Op::Scale(a, c) => {
                    let c = *c;
                    self.accumulate(&mut adj, *a, g.mapv(|x| x * c));
                }
                Op::Shift(a) => self.accumulate(&mut adj, *a, g),
                Op::Tanh(a) => {
                    let d = broadcast_zip(&g, &node.value, |gi, y| gi * (T::one() - y * y));
                    self.accumulate(&mut adj, *a, d);
                }
                Op::Sin(a) => {
                    let d = broadcast_zip(&g, self.value(*a), |gi, x| gi * x.cos());
                    self.accumulate(&mut adj, *a, d);
                }
                Op::Cos(a) => {
                    let d = broadcast_zip(&g, self.value(*a), |gi, x| -gi * x.sin());
                    self.accumulate(&mut adj, *a, d);
                }
                Op::Powi(a, n) => {
                    let n = *n;
                    let nf = T::of(n as f64);
                    let d = broadcast_zip(&g, self.value(*a), |gi, x| gi * nf * x.powi(n - 1));
                    self.accumulate(&mut adj, *a, d);
                }
                Op::Sigmoid(a) => {
                    let d = broadcast_zip(&g, &node.value, |gi, s| gi * s * (T::one() - s));
                    self.accumulate(&mut adj, *a, d);
                }
                Op::MeanSquare(a) => {
                    let v = self.value(*a);
                    let scale = g[[0, 0]] * T::of(2.0) / T::of(v.len() as f64);
                    self.accumulate(&mut adj, *a, v.mapv(|x| x * scale));
                }
                Op::Sum(a) => {
                    let gv = g[[0, 0]];
                    let shape = self.value(*a).raw_dim();
                    self.accumulate(&mut adj, *a, Array2::from_elem(shape, gv));
                }
                Op::Custom { name, inputs, vjp } => {
                    let Some(vjp) = vjp else {
                        return Err(Error::Unsupported(format!(
                            "no derivative rule for `{name}`"
                        )));
                    };
                    let grads = vjp(&g);
                    debug_assert_eq!(grads.len(), inputs.len());
                    for (inp, gi) in inputs.iter().zip(grads) {
                        if self.needs_grad(*inp) {
                            self.accumulate(&mut adj, *inp, gi);
                        }
                    }
                }
            }
        }
        Ok(adj[wrt.0].take().unwrap_or_else(|| Array2::zeros(wrt_shape)))
    }

    fn accumulate(&self, adj: &mut [Option<Array2<T>>], v: Var, g: Array2<T>) {
        let target = self.value(v).dim();
        let g = if g.dim() == target {
            g
        } else if target == (1, 1) {
            Array2::from_elem((1, 1), g.sum())
        } else {
            panic!("adjoint shape {:?} does not match {:?}", g.dim(), target);
        };
        match &mut adj[v.0] {
            Some(a) => *a += &g,
            slot @ None => *slot = Some(g),
        }
    }
}

#[inline]
fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn broadcast_zip<T: Real>(a: &Array2<T>, b: &Array2<T>, f: impl Fn(T, T) -> T) -> Array2<T> {
    if a.dim() == b.dim() {
        let mut out = a.clone();
        out.zip_mut_with(b, |x, &y| *x = f(*x, y));
        out
    } else if b.dim() == (1, 1) {
        let y = b[[0, 0]];
        a.mapv(|x| f(x, y))
    } else if a.dim() == (1, 1) {
        let x = a[[0, 0]];
        b.mapv(|y| f(x, y))
    } else {
        panic!("shape mismatch {:?} vs {:?}", a.dim(), b.dim());
    }
}

// tanh derivatives in terms of y = tanh(z):
//   f1 = 1 - y^2, f2 = -2 y f1, f3 = -2 (f1^2 + y f2), f4 = -6 f1 f2 - 2 y f3
#[inline]
fn tanh_derivs<T: Real>(y: T) -> (T, T, T, T) {
    let two = T::of(2.0);
    let f1 = T::one() - y * y;
    let f2 = -two * y * f1;
    let f3 = -two * (f1 * f1 + y * f2);
    let f4 = -T::of(6.0) * f1 * f2 - two * y * f3;
    (f1, f2, f3, f4)
}

pub(crate) fn tanh<T: Real>(x: T) -> T {
    let mut y = [T::zero()];
    T::tanh_slice(&[x], &mut y);
    y[0]
}

pub(crate) fn tanh_jet_forward<T: Real>(z: &Array2<T>, layout: JetLayout, n: usize) -> Array2<T> {
    let z = z.as_standard_layout();
    let zs = z.as_slice().expect("contiguous");
    let m = n * z.ncols();
    let xo = layout.x_order;
    let tc = layout.t_channel();
    let three = T::of(3.0);
    let mut out = vec![T::zero(); zs.len()];
    let (y, rest) = out.split_at_mut(m);
    T::tanh_slice(&zs[..m], y);
    let mut chans: Vec<&mut [T]> = rest.chunks_mut(m).collect();
    let zc = |c: usize| &zs[c * m..(c + 1) * m];
    // one pass per channel keeps the loops branch-free
    if let Some(c) = tc {
        for ((o, &zt), &y) in chans[c - 1].iter_mut().zip(zc(c)).zip(y.iter()) {
            *o = (T::one() - y * y) * zt;
        }
    }
    match xo {
        0 => {}
        1 => {
            for ((o, &z1), &y) in chans[0].iter_mut().zip(zc(1)).zip(y.iter()) {
                *o = (T::one() - y * y) * z1;
            }
        }
        2 => {
            let (c1, c2) = chans.split_at_mut(1);
            for i in 0..m {
                let (f1, f2, _, _) = tanh_derivs(y[i]);
                let (z1, z2) = (zs[m + i], zs[2 * m + i]);
                c1[0][i] = f1 * z1;
                c2[0][i] = f2 * z1 * z1 + f1 * z2;
            }
        }
        _ => {
            let (c1, c23) = chans.split_at_mut(1);
            let (c2, c3) = c23.split_at_mut(1);
            for i in 0..m {
                let (f1, f2, f3, _) = tanh_derivs(y[i]);
                let (z1, z2, z3) = (zs[m + i], zs[2 * m + i], zs[3 * m + i]);
                c1[0][i] = f1 * z1;
                c2[0][i] = f2 * z1 * z1 + f1 * z2;
                c3[0][i] = f3 * z1 * z1 * z1 + three * f2 * z1 * z2 + f1 * z3;
            }
        }
    }
    Array2::from_shape_vec(z.dim(), out).expect("shape")
}

pub(crate) fn tanh_jet_backward<T: Real>(
    z: &Array2<T>,
    y: &Array2<T>,
    g: &Array2<T>,
    layout: JetLayout,
    n: usize,
) -> Array2<T> {
    let z = z.as_standard_layout();
    let y = y.as_standard_layout();
    let g = g.as_standard_layout();
    let zs = z.as_slice().expect("contiguous");
    let ys = y.as_slice().expect("contiguous");
    let gs = g.as_slice().expect("contiguous");
    let m = n * z.ncols();
    let xo = layout.x_order;
    let tc = layout.t_channel();
    let two = T::of(2.0);
    let three = T::of(3.0);
    let mut dz = vec![T::zero(); zs.len()];
    for i in 0..m {
        let (f1, f2, f3, f4) = tanh_derivs(ys[i]);
        let mut d0 = gs[i] * f1;
        if xo >= 1 {
            let z1 = zs[m + i];
            let g1 = gs[m + i];
            d0 += g1 * f2 * z1;
            let mut d1 = g1 * f1;
            if xo >= 2 {
                let z2 = zs[2 * m + i];
                let g2 = gs[2 * m + i];
                d0 += g2 * (f3 * z1 * z1 + f2 * z2);
                d1 += g2 * two * f2 * z1;
                let mut d2 = g2 * f1;
                if xo >= 3 {
                    let z3 = zs[3 * m + i];
                    let g3 = gs[3 * m + i];
                    d0 += g3 * (f4 * z1 * z1 * z1 + three * f3 * z1 * z2 + f2 * z3);
                    d1 += g3 * three * (f3 * z1 * z1 + f2 * z2);
                    d2 += g3 * three * f2 * z1;
                    dz[3 * m + i] = g3 * f1;
                }
                dz[2 * m + i] = d2;
            }
            dz[m + i] = d1;
        }
        if let Some(c) = tc {
            let gt = gs[c * m + i];
            d0 += gt * f2 * zs[c * m + i];
            dz[c * m + i] = gt * f1;
        }
        dz[i] = d0;
    }
    Array2::from_shape_vec(z.dim(), dz).expect("shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn fast_tanh_matches_libm() {
        let mut worst: f64 = 0.0;
        for i in -250_000..=250_000 {
            let x = i as f64 * 1e-4;
            let rel = (tanh(x) - x.tanh()).abs() / x.tanh().abs().max(1e-300);
            worst = worst.max(rel);
        }
        assert!(worst <= 1e-14, "{worst:e}");
        assert_eq!(tanh(0.0), 0.0);
        assert_eq!(tanh(40.0), 1.0);
        assert_eq!(tanh(-1e-20), -1e-20);
        assert!((tanh(0.7f32) - 0.7f32.tanh()).abs() <= 1e-6);
    }

    fn fd_scalar(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-6;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn quadratic_gradient_is_twice_params() {
        let mut tape = Tape::<f64>::new();
        let theta = tape.input_vector(&[1.0, -2.0, 0.5]);
        let loss = tape.mean_square(theta);
        let loss = tape.scale(loss, 3.0);
        let g = tape.gradient(loss, theta).unwrap();
        assert_eq!(g.column(0).to_vec(), vec![2.0, -4.0, 1.0]);
    }

    #[test]
    fn constant_output_has_zero_gradient() {
        let mut tape = Tape::<f64>::new();
        let theta = tape.input_vector(&[1.0, 2.0]);
        let c = tape.constant_scalar(4.0);
        let g = tape.gradient(c, theta).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn opaque_node_reports_unsupported() {
        let mut tape = Tape::<f64>::new();
        let theta = tape.input_vector(&[1.0, 2.0]);
        let abs = tape.value(theta).mapv(f64::abs);
        let opaque = tape.custom("abs", &[theta], abs, None);
        let loss = tape.sum(opaque);
        let err = tape.gradient(loss, theta).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }

    #[test]
    fn elementwise_ops_match_finite_differences() {
        let f = |x: f64| {
            let mut tape = Tape::<f64>::new();
            let v = tape.input(array![[x]]);
            let a = tape.sin(v);
            let b = tape.cos(v);
            let c = tape.tanh(v);
            let d = tape.powi(v, 3);
            let e = tape.sigmoid(v);
            let ab = tape.mul(a, b);
            let cd = tape.sub(c, d);
            let s = tape.add(ab, cd);
            let s = tape.add(s, e);
            let s = tape.shift(s, 0.7);
            (tape.scalar(s), tape.gradient(s, v).unwrap()[[0, 0]])
        };
        for &x in &[-1.3, -0.2, 0.4, 2.1] {
            let (_, g) = f(x);
            let fd = fd_scalar(|x| f(x).0, x);
            assert!((g - fd).abs() < 1e-8, "x={x}: {g} vs {fd}");
        }
    }

    #[test]
    fn scalar_broadcast_reduces_adjoint() {
        let mut tape = Tape::<f64>::new();
        let s = tape.input(array![[2.0]]);
        let v = tape.constant_vector(&[1.0, 2.0, 3.0]);
        let p = tape.mul(v, s);
        let loss = tape.sum(p);
        let g = tape.gradient(loss, s).unwrap();
        assert_eq!(g[[0, 0]], 6.0);
    }

    #[test]
    fn tanh_jet_matches_closed_form_derivatives() {
        // z(x) = 0.7 x + 0.2 and t-tangent 1.5 at x = 0.3
        let x = 0.3_f64;
        let z0 = 0.7 * x + 0.2;
        let layout = JetLayout::new(3, true);
        let z = Array2::from_shape_vec((5, 1), vec![z0, 0.7, 0.0, 0.0, 1.5]).unwrap();
        let y = tanh_jet_forward(&z, layout, 1);
        let t = z0.tanh();
        let sech2 = 1.0 - t * t;
        assert!((y[[0, 0]] - t).abs() < 1e-15);
        assert!((y[[1, 0]] - 0.7 * sech2).abs() < 1e-15);
        assert!((y[[2, 0]] - 0.49 * (-2.0 * t * sech2)).abs() < 1e-15);
        let third = -2.0 * sech2 * (sech2 - 2.0 * t * t);
        assert!((y[[3, 0]] - 0.343 * third).abs() < 1e-14);
        assert!((y[[4, 0]] - 1.5 * sech2).abs() < 1e-15);
    }
}
