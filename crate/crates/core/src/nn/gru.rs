//! Gated recurrent cell.
//!
//! ```text
//! z  = sigmoid(W_z x + U_z h + b_z)          update gate
//! r  = sigmoid(W_r x + U_r h + b_r)          reset gate
//! n  = tanh(W_n x + U_n (r * h) + b_n)       candidate
//! h' = (1 - z) * h + z * n
//! ```
//!
//! The reset gate multiplies the hidden state before the candidate
//! transform. With every parameter at zero, `z = 1/2` and `n = 0`, so a zero
//! initial state stays zero forever.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::graph::{gru_forward, Graph, Var};
use crate::nn::param::{Module, Param};

#[derive(Clone, Debug)]
pub struct GruCell {
    input_dim: usize,
    hidden_dim: usize,
    w_z: Param,
    u_z: Param,
    b_z: Param,
    w_r: Param,
    u_r: Param,
    b_r: Param,
    w_n: Param,
    u_n: Param,
    b_n: Param,
}

/// Graph handles of a bound cell, in parameter order.
#[derive(Clone, Copy, Debug)]
pub struct GruVars(pub [Var; 9]);

impl GruCell {
    /// Gate parameters drawn from `U(-k, k)` with `k = 1/sqrt(input_dim + hidden_dim)`.
    pub fn new<R: Rng + ?Sized>(name: &str, input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let k = 1.0 / ((input_dim + hidden_dim) as f64).sqrt();
        let (i, h) = (input_dim, hidden_dim);
        let mut mk = |tag: &str, rows, cols| Param::uniform(format!("{name}.{tag}"), rows, cols, k, rng);
        Self {
            input_dim,
            hidden_dim,
            w_z: mk("w_z", h, i),
            u_z: mk("u_z", h, h),
            b_z: mk("b_z", h, 1),
            w_r: mk("w_r", h, i),
            u_r: mk("u_r", h, h),
            b_r: mk("b_r", h, 1),
            w_n: mk("w_n", h, i),
            u_n: mk("u_n", h, h),
            b_n: mk("b_n", h, 1),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    /// One recurrence step without recording anything.
    pub fn step(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        let p = [
            &self.w_z.data[..],
            &self.u_z.data,
            &self.b_z.data,
            &self.w_r.data,
            &self.u_r.data,
            &self.b_r.data,
            &self.w_n.data,
            &self.u_n.data,
            &self.b_n.data,
        ];
        gru_forward(p, self.input_dim, self.hidden_dim, x, h).h
    }

    /// Run the cell over `inputs` from `h0`, returning one hidden state per step.
    pub fn forward(&self, inputs: &[Vec<f64>], h0: &[f64]) -> Result<Vec<Vec<f64>>> {
        if h0.len() != self.hidden_dim {
            return Err(Error::Dimension {
                context: "gru initial state",
                expected: self.hidden_dim,
                actual: h0.len(),
            });
        }
        if let Some(bad) = inputs.iter().find(|x| x.len() != self.input_dim) {
            return Err(Error::Dimension {
                context: "gru input",
                expected: self.input_dim,
                actual: bad.len(),
            });
        }
        let mut h = h0.to_vec();
        let mut out = Vec::with_capacity(inputs.len());
        for x in inputs {
            h = self.step(x, &h);
            out.push(h.clone());
        }
        Ok(out)
    }

    pub fn bind(&self, g: &mut Graph) -> GruVars {
        let params = self.params();
        GruVars(std::array::from_fn(|i| g.param(params[i])))
    }

    /// Recorded version of [`GruCell::step`].
    pub fn step_graph(g: &mut Graph, v: &GruVars, x: Var, h: Var) -> Var {
        g.gru_step(v.0, x, h)
    }
}

impl Module for GruCell {
    fn params(&self) -> Vec<&Param> {
        vec![
            &self.w_z, &self.u_z, &self.b_z, &self.w_r, &self.u_r, &self.b_r, &self.w_n, &self.u_n,
            &self.b_n,
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![
            &mut self.w_z,
            &mut self.u_z,
            &mut self.b_z,
            &mut self.w_r,
            &mut self.u_r,
            &mut self.b_r,
            &mut self.w_n,
            &mut self.u_n,
            &mut self.b_n,
        ]
    }
}
