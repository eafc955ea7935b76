use rand::Rng;

/// A named, shaped block of trainable values. Vectors are stored as `rows x 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Param {
    pub fn zeros(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Self {
            name: name.into(),
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Uniform initialization in `[-bound, bound]`.
    pub fn uniform<R: Rng + ?Sized>(
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        bound: f64,
        rng: &mut R,
    ) -> Self {
        let data = (0..rows * cols)
            .map(|_| rng.gen_range(-bound..=bound))
            .collect();
        Self {
            name: name.into(),
            rows,
            cols,
            data,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

/// Gradients aligned with a module's [`Module::params`] order.
pub type Grads = Vec<Vec<f64>>;

/// Anything that owns an ordered list of parameters.
///
/// The order returned by `params` and `params_mut` must be identical; it is
/// also the order in which the module binds its parameters onto a graph, so
/// gradients coming back from [`crate::nn::Graph::backward`] line up.
pub trait Module {
    fn params(&self) -> Vec<&Param>;
    fn params_mut(&mut self) -> Vec<&mut Param>;

    fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for p in self.params() {
            out.extend_from_slice(&p.data);
        }
        out
    }

    fn set_flat_params(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for p in self.params_mut() {
            let n = p.data.len();
            p.data.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        assert_eq!(offset, flat.len(), "flat parameter length mismatch");
    }

    /// Overwrite every parameter with zero.
    fn zero_params(&mut self) {
        for p in self.params_mut() {
            p.data.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

pub fn flatten_grads(grads: &[Vec<f64>]) -> Vec<f64> {
    grads.iter().flat_map(|g| g.iter().copied()).collect()
}

/// Exponential moving average `target <- (1 - tau) * target + tau * source`.
pub fn soft_update<M: Module>(target: &mut M, source: &M, tau: f64) {
    for (t, s) in target.params_mut().into_iter().zip(source.params()) {
        for (tv, sv) in t.data.iter_mut().zip(&s.data) {
            *tv = (1.0 - tau) * *tv + tau * sv;
        }
    }
}
