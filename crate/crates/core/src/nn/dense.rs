use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::graph::{matvec, Graph, Var};
use crate::nn::param::{Module, Param};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    fn apply_graph(self, g: &mut Graph, v: Var) -> Var {
        match self {
            Activation::Relu => g.relu(v),
            Activation::Tanh => g.tanh(v),
            Activation::Identity => v,
        }
    }
}

/// Fully connected network; the activation is applied after every hidden
/// layer and never after the output layer.
#[derive(Clone, Debug)]
pub struct DenseNet {
    weights: Vec<Param>,
    biases: Vec<Param>,
    pub activation: Activation,
    input_dim: usize,
    output_dim: usize,
}

/// Hidden sizes used when nothing else is configured.
pub const DEFAULT_HIDDEN: [usize; 2] = [256, 256];

impl DenseNet {
    /// Layers `input_dim -> hidden[0] -> ... -> output_dim`, weights and
    /// biases drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new<R: Rng + ?Sized>(
        name: &str,
        input_dim: usize,
        hidden: &[usize],
        output_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(output_dim);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (i, pair) in dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            weights.push(Param::uniform(format!("{name}.w{i}"), fan_out, fan_in, bound, rng));
            biases.push(Param::uniform(format!("{name}.b{i}"), fan_out, 1, bound, rng));
        }
        Self {
            weights,
            biases,
            activation,
            input_dim,
            output_dim,
        }
    }

    /// Build from explicit layers, checking that dimensions chain.
    pub fn from_layers(layers: Vec<(Param, Param)>, activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidModel("dense net needs at least one layer".into()));
        }
        let input_dim = layers[0].0.cols;
        let mut expected_in = input_dim;
        for (w, b) in &layers {
            if w.cols != expected_in {
                return Err(Error::Dimension {
                    context: "dense layer input",
                    expected: expected_in,
                    actual: w.cols,
                });
            }
            if b.rows != w.rows || b.cols != 1 {
                return Err(Error::Dimension {
                    context: "dense layer bias",
                    expected: w.rows,
                    actual: b.rows,
                });
            }
            expected_in = w.rows;
        }
        let (weights, biases) = layers.into_iter().unzip();
        Ok(Self {
            weights,
            biases,
            activation,
            input_dim,
            output_dim: expected_in,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::Dimension {
                context: "dense input",
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        let last = self.weights.len() - 1;
        let mut h = x.to_vec();
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut y = matvec(&w.data, w.rows, w.cols, &h);
            for (yv, bv) in y.iter_mut().zip(&b.data) {
                *yv += bv;
            }
            if i != last {
                y.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            h = y;
        }
        Ok(h)
    }

    pub fn bind(&self, g: &mut Graph) -> DenseVars {
        let layers = self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| (g.param(w), g.param(b)))
            .collect();
        DenseVars { layers }
    }

    pub fn forward_graph(&self, g: &mut Graph, vars: &DenseVars, x: Var) -> Var {
        let last = vars.layers.len() - 1;
        let mut h = x;
        for (i, (w, b)) in vars.layers.iter().enumerate() {
            let y = g.affine(*w, h, *b);
            h = if i != last {
                self.activation.apply_graph(g, y)
            } else {
                y
            };
        }
        h
    }
}

/// Graph handles for a bound [`DenseNet`].
#[derive(Clone, Debug)]
pub struct DenseVars {
    layers: Vec<(Var, Var)>,
}

impl Module for DenseNet {
    fn params(&self) -> Vec<&Param> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w, b])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_shape_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = DenseNet::new("q", 10, &DEFAULT_HIDDEN, 3, Activation::Relu, &mut rng);
        let shapes: Vec<(usize, usize)> = net.params().iter().map(|p| (p.rows, p.cols)).collect();
        assert_eq!(
            shapes,
            vec![(256, 10), (256, 1), (256, 256), (256, 1), (3, 256), (3, 1)]
        );
    }

    #[test]
    fn zero_weights_output_final_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = DenseNet::new("z", 4, &[5, 5], 2, Activation::Relu, &mut rng);
        net.zero_params();
        net.biases[2].data = vec![0.7, -1.5];
        let y = net.forward(&[1.0, -2.0, 3.0, 4.0]).unwrap();
        assert_eq!(y, vec![0.7, -1.5]);
    }

    #[test]
    fn identity_layer_passes_nonnegative_input() {
        let mut w = Param::zeros("w", 3, 3);
        for i in 0..3 {
            w.data[i * 3 + i] = 1.0;
        }
        let net = DenseNet::from_layers(vec![(w, Param::zeros("b", 3, 1))], Activation::Relu).unwrap();
        let x = [0.0, 2.5, 1.0];
        assert_eq!(net.forward(&x).unwrap(), x.to_vec());
    }

    #[test]
    fn wrong_input_length_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = DenseNet::new("d", 3, &[4], 1, Activation::Relu, &mut rng);
        assert!(matches!(net.forward(&[1.0, 2.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn mismatched_layers_rejected() {
        let l0 = (Param::zeros("w0", 4, 3), Param::zeros("b0", 4, 1));
        let l1 = (Param::zeros("w1", 2, 5), Param::zeros("b1", 2, 1));
        assert!(DenseNet::from_layers(vec![l0, l1], Activation::Relu).is_err());
    }

    #[test]
    fn graph_and_plain_forward_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = DenseNet::new("d", 6, &[8, 7], 3, Activation::Tanh, &mut rng);
        let x = vec![0.3, -0.2, 0.0, 1.0, 0.5, -0.9];
        let mut g = Graph::new();
        let vars = net.bind(&mut g);
        let xv = g.constant(x.clone());
        let y = net.forward_graph(&mut g, &vars, xv);
        assert_eq!(g.value(y), net.forward(&x).unwrap().as_slice());
    }
}
