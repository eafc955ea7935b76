//! Reverse-mode differentiation over a tape of vector operations.
//!
//! The tape only knows the handful of operations the models in this crate
//! need: matrix-vector products, element-wise arithmetic, the three gate
//! nonlinearities, reductions, indexing and a gradient stop. Parameters are
//! bound once per graph and may be reused at every time step, so gradients of
//! recurrent models accumulate across the whole unrolled sequence.
//!
//! ```
//! use diaster::nn::{Graph, Param};
//!
//! let p = Param { name: "p".into(), rows: 2, cols: 1, data: vec![1.0, 2.0] };
//! let mut g = Graph::new();
//! let v = g.param(&p);
//! let sq = g.square(v);
//! let loss = g.sum(sq);
//! let grads = g.backward(loss).unwrap();
//! assert_eq!(grads[0], vec![2.0, 4.0]);
//! ```

use crate::error::{Error, Result};
use crate::nn::param::{Grads, Param};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Constant,
    Param(usize),
    MatVec { w: Var, x: Var },
    Affine { w: Var, x: Var, b: Var },
    /// Fused recurrent step; `gates` holds `z`, `r` and `n` back to back.
    GruStep { p: [Var; 9], x: Var, h: Var, gates: Vec<f64> },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    OneMinus(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Square(Var),
    Sum(Var),
    AddAll(Vec<Var>),
    Index(Var, usize),
    Detach,
}

struct Node {
    value: Vec<f64>,
    rows: usize,
    cols: usize,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    n_params: usize,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of parameters bound so far; also the length of the gradient list.
    pub fn num_params(&self) -> usize {
        self.n_params
    }

    fn push(&mut self, value: Vec<f64>, rows: usize, cols: usize, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            rows,
            cols,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn scalar_value(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    pub fn constant(&mut self, value: Vec<f64>) -> Var {
        let n = value.len();
        self.push(value, n, 1, Op::Constant, false)
    }

    pub fn scalar(&mut self, x: f64) -> Var {
        self.constant(vec![x])
    }

    /// Bind a parameter; its gradient slot is the number of params bound before it.
    pub fn param(&mut self, p: &Param) -> Var {
        let slot = self.n_params;
        self.n_params += 1;
        self.push(p.data.clone(), p.rows, p.cols, Op::Param(slot), true)
    }

    pub fn matvec(&mut self, w: Var, x: Var) -> Var {
        let (rows, cols) = (self.nodes[w.0].rows, self.nodes[w.0].cols);
        let xv = &self.nodes[x.0].value;
        assert_eq!(cols, xv.len(), "matvec: {}x{} times {}", rows, cols, xv.len());
        let wv = &self.nodes[w.0].value;
        let out = matvec(wv, rows, cols, xv);
        let rg = self.rg(w) || self.rg(x);
        self.push(out, rows, 1, Op::MatVec { w, x }, rg)
    }

    /// `w x + b` as a single node.
    pub fn affine(&mut self, w: Var, x: Var, b: Var) -> Var {
        let (rows, cols) = (self.nodes[w.0].rows, self.nodes[w.0].cols);
        let xv = &self.nodes[x.0].value;
        assert_eq!(cols, xv.len(), "affine: {}x{} times {}", rows, cols, xv.len());
        assert_eq!(self.nodes[b.0].value.len(), rows, "affine bias length");
        let mut out = matvec(&self.nodes[w.0].value, rows, cols, xv);
        for (o, bv) in out.iter_mut().zip(&self.nodes[b.0].value) {
            *o += bv;
        }
        let rg = self.rg(w) || self.rg(x) || self.rg(b);
        self.push(out, rows, 1, Op::Affine { w, x, b }, rg)
    }

    /// One gated recurrent step as a single node. `p` holds the gate
    /// parameters in the order `w_z, u_z, b_z, w_r, u_r, b_r, w_n, u_n, b_n`.
    pub fn gru_step(&mut self, p: [Var; 9], x: Var, h: Var) -> Var {
        let hd = self.nodes[h.0].value.len();
        let input_dim = self.nodes[x.0].value.len();
        for (i, v) in p.iter().enumerate() {
            let n = &self.nodes[v.0];
            let cols = match i % 3 {
                0 => input_dim,
                1 => hd,
                _ => 1,
            };
            assert_eq!((n.rows, n.cols), (hd, cols), "gru_step parameter {i} shape");
        }
        let weights: [&[f64]; 9] = p.map(|v| self.nodes[v.0].value.as_slice());
        let out = gru_forward(weights, input_dim, hd, &self.nodes[x.0].value, &self.nodes[h.0].value);
        let rg = p.iter().any(|v| self.rg(*v)) || self.rg(x) || self.rg(h);
        let mut gates = out.z;
        gates.extend_from_slice(&out.r);
        gates.extend_from_slice(&out.n);
        self.push(out.h, hd, 1, Op::GruStep { p, x, h, gates }, rg)
    }

    fn binary(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let av = &self.nodes[a.0].value;
        let bv = &self.nodes[b.0].value;
        assert_eq!(av.len(), bv.len(), "element-wise op on mismatched lengths");
        let out: Vec<f64> = av.iter().zip(bv).map(|(x, y)| f(*x, *y)).collect();
        let n = out.len();
        let rg = self.rg(a) || self.rg(b);
        self.push(out, n, 1, op, rg)
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let out: Vec<f64> = self.nodes[a.0].value.iter().map(|x| f(*x)).collect();
        let n = out.len();
        let rg = self.rg(a);
        self.push(out, n, 1, op, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        self.unary(a, |x| k * x, Op::Scale(a, k))
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        self.unary(a, |x| 1.0 - x, Op::OneMinus(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, |x| x * x, Op::Square(a))
    }

    /// Sum of all entries, producing a scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.nodes[a.0].value.iter().sum();
        let rg = self.rg(a);
        self.push(vec![s], 1, 1, Op::Sum(a), rg)
    }

    /// Element-wise sum of equally sized nodes, accumulated left to right.
    pub fn add_all(&mut self, vars: &[Var]) -> Var {
        assert!(!vars.is_empty(), "add_all of nothing");
        let n = self.nodes[vars[0].0].value.len();
        let mut out = vec![0.0; n];
        for v in vars {
            let val = &self.nodes[v.0].value;
            assert_eq!(val.len(), n, "add_all on mismatched lengths");
            for (o, x) in out.iter_mut().zip(val) {
                *o += x;
            }
        }
        let rg = vars.iter().any(|v| self.rg(*v));
        self.push(out, n, 1, Op::AddAll(vars.to_vec()), rg)
    }

    pub fn index(&mut self, a: Var, i: usize) -> Var {
        let x = self.nodes[a.0].value[i];
        let rg = self.rg(a);
        self.push(vec![x], 1, 1, Op::Index(a, i), rg)
    }

    /// Same value, no gradient flows back through it.
    pub fn detach(&mut self, a: Var) -> Var {
        let node = &self.nodes[a.0];
        let (value, rows, cols) = (node.value.clone(), node.rows, node.cols);
        self.push(value, rows, cols, Op::Detach, false)
    }

    /// Propagate d(loss)/d(node) back to every bound parameter.
    ///
    /// Returns one gradient vector per bound parameter, in binding order.
    pub fn backward(&self, loss: Var) -> Result<Grads> {
        let len = self.nodes[loss.0].value.len();
        if len != 1 {
            return Err(Error::NonScalarLoss(len));
        }
        if !self.rg(loss) {
            return Err(Error::DetachedLoss);
        }
        let mut param_grads: Grads = vec![Vec::new(); self.n_params];
        for node in &self.nodes {
            if let Op::Param(slot) = node.op {
                param_grads[slot] = vec![0.0; node.value.len()];
            }
        }
        let mut grads: Vec<Vec<f64>> = vec![Vec::new(); loss.0 + 1];
        grads[loss.0] = vec![1.0];

        for i in (0..=loss.0).rev() {
            if grads[i].is_empty() || !self.nodes[i].requires_grad {
                continue;
            }
            let gy = std::mem::take(&mut grads[i]);
            let node = &self.nodes[i];
            match &node.op {
                Op::Constant | Op::Detach => {}
                Op::Param(slot) => {
                    for (acc, g) in param_grads[*slot].iter_mut().zip(&gy) {
                        *acc += g;
                    }
                }
                Op::MatVec { w, x } => self.matvec_backward(&mut grads, *w, *x, &gy),
                Op::Affine { w, x, b } => {
                    self.matvec_backward(&mut grads, *w, *x, &gy);
                    self.accumulate(&mut grads, *b, &gy, |g, _| g);
                }
                Op::GruStep { p, x, h, gates } => self.gru_backward(&mut grads, p, *x, *h, gates, &gy),
                Op::Add(a, b) => {
                    self.accumulate(&mut grads, *a, &gy, |g, _| g);
                    self.accumulate(&mut grads, *b, &gy, |g, _| g);
                }
                Op::Sub(a, b) => {
                    self.accumulate(&mut grads, *a, &gy, |g, _| g);
                    self.accumulate(&mut grads, *b, &gy, |g, _| -g);
                }
                Op::Mul(a, b) => {
                    let bv = &self.nodes[b.0].value;
                    let av = &self.nodes[a.0].value;
                    self.accumulate(&mut grads, *a, &gy, |g, k| g * bv[k]);
                    self.accumulate(&mut grads, *b, &gy, |g, k| g * av[k]);
                }
                Op::Scale(a, c) => {
                    let c = *c;
                    self.accumulate(&mut grads, *a, &gy, |g, _| g * c);
                }
                Op::OneMinus(a) => self.accumulate(&mut grads, *a, &gy, |g, _| -g),
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    self.accumulate(&mut grads, *a, &gy, |g, k| g * y[k] * (1.0 - y[k]));
                }
                Op::Tanh(a) => {
                    let y = &node.value;
                    self.accumulate(&mut grads, *a, &gy, |g, k| g * (1.0 - y[k] * y[k]));
                }
                Op::Relu(a) => {
                    let y = &node.value;
                    self.accumulate(&mut grads, *a, &gy, |g, k| if y[k] > 0.0 { g } else { 0.0 });
                }
                Op::Square(a) => {
                    let x = &self.nodes[a.0].value;
                    self.accumulate(&mut grads, *a, &gy, |g, k| 2.0 * x[k] * g);
                }
                Op::Sum(a) => {
                    let g0 = gy[0];
                    self.accumulate(&mut grads, *a, &gy, |_, _| g0);
                }
                Op::AddAll(vars) => {
                    for v in vars {
                        self.accumulate(&mut grads, *v, &gy, |g, _| g);
                    }
                }
                Op::Index(a, idx) => {
                    if self.rg(*a) {
                        let n = self.nodes[a.0].value.len();
                        let ga = grad_slot(&mut grads, *a, n);
                        ga[*idx] += gy[0];
                    }
                }
            }
        }
        Ok(param_grads)
    }

    fn matvec_backward(&self, grads: &mut [Vec<f64>], w: Var, x: Var, gy: &[f64]) {
        let wn = &self.nodes[w.0];
        let xv = &self.nodes[x.0].value;
        let (rows, cols) = (wn.rows, wn.cols);
        if wn.requires_grad {
            let gw = grad_slot(grads, w, rows * cols);
            outer_accumulate(gw, gy, xv);
        }
        if self.nodes[x.0].requires_grad {
            let gx = grad_slot(grads, x, cols);
            transpose_accumulate(gx, &wn.value, rows, cols, gy);
        }
    }

    fn gru_backward(&self, grads: &mut [Vec<f64>], p: &[Var; 9], x: Var, h: Var, gates: &[f64], gy: &[f64]) {
        let hd = gy.len();
        let (z, rest) = gates.split_at(hd);
        let (r, n) = rest.split_at(hd);
        let xv = &self.nodes[x.0].value;
        let hv = &self.nodes[h.0].value;
        let input_dim = xv.len();
        let val = |i: usize| self.nodes[p[i].0].value.as_slice();

        let da_z: Vec<f64> = (0..hd).map(|k| gy[k] * (n[k] - hv[k]) * z[k] * (1.0 - z[k])).collect();
        let da_n: Vec<f64> = (0..hd).map(|k| gy[k] * z[k] * (1.0 - n[k] * n[k])).collect();
        let mut d_rh = vec![0.0; hd];
        transpose_accumulate(&mut d_rh, val(7), hd, hd, &da_n);
        let da_r: Vec<f64> = (0..hd).map(|k| d_rh[k] * hv[k] * r[k] * (1.0 - r[k])).collect();
        let rh: Vec<f64> = (0..hd).map(|k| r[k] * hv[k]).collect();

        for (gate, (da, hin)) in [(&da_z, hv.as_slice()), (&da_r, hv.as_slice()), (&da_n, rh.as_slice())]
            .into_iter()
            .enumerate()
        {
            let (w, u, b) = (p[3 * gate], p[3 * gate + 1], p[3 * gate + 2]);
            if self.rg(w) {
                outer_accumulate(grad_slot(grads, w, hd * input_dim), da, xv);
            }
            if self.rg(u) {
                outer_accumulate(grad_slot(grads, u, hd * hd), da, hin);
            }
            if self.rg(b) {
                for (acc, g) in grad_slot(grads, b, hd).iter_mut().zip(da) {
                    *acc += g;
                }
            }
        }
        if self.rg(h) {
            let gh = grad_slot(grads, h, hd);
            for k in 0..hd {
                gh[k] += gy[k] * (1.0 - z[k]) + d_rh[k] * r[k];
            }
            transpose_accumulate(gh, val(1), hd, hd, &da_z);
            transpose_accumulate(gh, val(4), hd, hd, &da_r);
        }
        if self.rg(x) {
            let gx = grad_slot(grads, x, input_dim);
            transpose_accumulate(gx, val(0), hd, input_dim, &da_z);
            transpose_accumulate(gx, val(3), hd, input_dim, &da_r);
            transpose_accumulate(gx, val(6), hd, input_dim, &da_n);
        }
    }

    /// `grads[a][k] += f(gy[k'], k)` where `gy` is broadcast when it is a scalar
    /// feeding a vector (used by `Sum`).
    fn accumulate(&self, grads: &mut [Vec<f64>], a: Var, gy: &[f64], f: impl Fn(f64, usize) -> f64) {
        if !self.rg(a) {
            return;
        }
        let n = self.nodes[a.0].value.len();
        let ga = grad_slot(grads, a, n);
        if gy.len() == n {
            for k in 0..n {
                ga[k] += f(gy[k], k);
            }
        } else {
            for (k, acc) in ga.iter_mut().enumerate() {
                *acc += f(gy[0], k);
            }
        }
    }
}

fn grad_slot(grads: &mut [Vec<f64>], v: Var, n: usize) -> &mut Vec<f64> {
    let g = &mut grads[v.0];
    if g.is_empty() {
        *g = vec![0.0; n];
    }
    g
}

/// `gw += gy x^T`, skipping zero entries of `x`.
fn outer_accumulate(gw: &mut [f64], gy: &[f64], x: &[f64]) {
    let cols = x.len();
    let nz: Vec<usize> = (0..cols).filter(|&j| x[j] != 0.0).collect();
    for (r, &g) in gy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let row = &mut gw[r * cols..(r + 1) * cols];
        for &j in &nz {
            row[j] += g * x[j];
        }
    }
}

/// `gx += w^T gy`.
fn transpose_accumulate(gx: &mut [f64], w: &[f64], rows: usize, cols: usize, gy: &[f64]) {
    for r in 0..rows {
        let g = gy[r];
        if g == 0.0 {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for (acc, wv) in gx.iter_mut().zip(row) {
            *acc += g * wv;
        }
    }
}

/// Gate activations and next state of one recurrent step.
pub(crate) struct GruGates {
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub n: Vec<f64>,
    pub h: Vec<f64>,
}

/// Forward pass of the recurrent step shared by the plain and recorded paths.
pub(crate) fn gru_forward(p: [&[f64]; 9], input_dim: usize, hd: usize, x: &[f64], h: &[f64]) -> GruGates {
    let nz: Vec<usize> = (0..input_dim).filter(|&j| x[j] != 0.0).collect();
    let sparse = nz.len() * 2 < input_dim;
    let affine = |w: &[f64], u: &[f64], b: &[f64], hin: &[f64], f: fn(f64) -> f64| -> Vec<f64> {
        (0..hd)
            .map(|k| {
                let wrow = &w[k * input_dim..(k + 1) * input_dim];
                let wx: f64 = if sparse {
                    nz.iter().map(|&j| wrow[j] * x[j]).sum()
                } else {
                    wrow.iter().zip(x).map(|(a, b)| a * b).sum()
                };
                let urow = &u[k * hd..(k + 1) * hd];
                let uh: f64 = urow.iter().zip(hin).map(|(a, b)| a * b).sum();
                f(wx + uh + b[k])
            })
            .collect()
    };
    let z = affine(p[0], p[1], p[2], h, sigmoid);
    let r = affine(p[3], p[4], p[5], h, sigmoid);
    let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
    let n = affine(p[6], p[7], p[8], &rh, f64::tanh);
    let h = (0..hd).map(|k| (1.0 - z[k]) * h[k] + z[k] * n[k]).collect();
    GruGates { z, r, n, h }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Row-major `w (rows x cols) * x`, skipping zero input entries (one-hot
/// encodings make most of them zero).
pub fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(w.len(), rows * cols);
    let nz: Vec<usize> = (0..cols).filter(|&j| x[j] != 0.0).collect();
    let mut out = vec![0.0; rows];
    if nz.len() * 2 < cols {
        for (r, o) in out.iter_mut().enumerate() {
            let row = &w[r * cols..(r + 1) * cols];
            *o = nz.iter().map(|&j| row[j] * x[j]).sum();
        }
    } else {
        for (r, o) in out.iter_mut().enumerate() {
            let row = &w[r * cols..(r + 1) * cols];
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(data: Vec<f64>) -> Param {
        Param {
            name: "p".into(),
            rows: data.len(),
            cols: 1,
            data,
        }
    }

    #[test]
    fn quadratic_gradient() {
        let mut g = Graph::new();
        let v = g.param(&p(vec![1.0, 2.0]));
        let sq = g.square(v);
        let loss = g.sum(sq);
        assert_eq!(g.scalar_value(loss), 5.0);
        assert_eq!(g.backward(loss).unwrap(), vec![vec![2.0, 4.0]]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut g = Graph::new();
        let v = g.param(&p(vec![1.0, 2.0]));
        let sq = g.square(v);
        assert!(matches!(g.backward(sq), Err(Error::NonScalarLoss(2))));
    }

    #[test]
    fn detached_loss_rejected() {
        let mut g = Graph::new();
        let v = g.param(&p(vec![1.0, 2.0]));
        let d = g.detach(v);
        let loss = g.sum(d);
        assert!(matches!(g.backward(loss), Err(Error::DetachedLoss)));
        let c = g.constant(vec![3.0]);
        assert!(matches!(g.backward(c), Err(Error::DetachedLoss)));
    }

    #[test]
    fn detach_blocks_one_path_only() {
        // loss = x * stop(x) => d/dx = stop(x) = 3
        let mut g = Graph::new();
        let x = g.param(&p(vec![3.0]));
        let d = g.detach(x);
        let y = g.mul(x, d);
        let loss = g.sum(y);
        assert_eq!(g.backward(loss).unwrap()[0], vec![3.0]);
    }

    #[test]
    fn reused_param_accumulates() {
        // loss = sum(w x) + sum(w y) with w reused
        let w = Param {
            name: "w".into(),
            rows: 1,
            cols: 2,
            data: vec![0.5, -1.0],
        };
        let mut g = Graph::new();
        let wv = g.param(&w);
        let x = g.constant(vec![1.0, 2.0]);
        let y = g.constant(vec![3.0, 0.0]);
        let a = g.matvec(wv, x);
        let b = g.matvec(wv, y);
        let s = g.add_all(&[a, b]);
        let loss = g.sum(s);
        assert_eq!(g.backward(loss).unwrap()[0], vec![4.0, 2.0]);
    }

    #[test]
    fn sparse_and_dense_matvec_agree() {
        let w: Vec<f64> = (0..12).map(|i| i as f64 * 0.25 - 1.0).collect();
        let sparse = [0.0, 1.0, 0.0, 0.0];
        let dense = [0.5, 1.0, -2.0, 0.0];
        let brute = |x: &[f64]| -> Vec<f64> {
            (0..3)
                .map(|r| (0..4).map(|c| w[r * 4 + c] * x[c]).sum())
                .collect()
        };
        assert_eq!(matvec(&w, 3, 4, &sparse), brute(&sparse));
        assert_eq!(matvec(&w, 3, 4, &dense), brute(&dense));
    }
}
