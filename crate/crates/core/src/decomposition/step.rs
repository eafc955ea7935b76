use rand::Rng;

use crate::env::trajectory::{Pair, PairEncoder};
use crate::nn::dense::{Activation, DenseNet, DenseVars};
use crate::nn::graph::{Graph, Var};
use crate::nn::param::{Module, Param};

/// Markovian per-step reward `r(s, a)`, a dense network over the pair
/// encoding. With `time_feature` the normalised step index `t / T` is
/// appended to the input.
#[derive(Clone, Debug)]
pub struct StepRewardModel {
    encoder: PairEncoder,
    time_feature: bool,
    horizon: usize,
    net: DenseNet,
}

impl StepRewardModel {
    pub fn new<R: Rng + ?Sized>(
        name: &str,
        encoder: PairEncoder,
        hidden: &[usize],
        time_feature: bool,
        horizon: usize,
        rng: &mut R,
    ) -> Self {
        let dim = encoder.dim() + time_feature as usize;
        Self {
            encoder,
            time_feature,
            horizon: horizon.max(1),
            net: DenseNet::new(name, dim, hidden, 1, Activation::Relu, rng),
        }
    }

    pub fn input(&self, pair: Pair, t: usize) -> Vec<f64> {
        let mut x = self.encoder.encode(pair);
        if self.time_feature {
            x.push(t as f64 / self.horizon as f64);
        }
        x
    }

    pub fn reward(&self, pair: Pair, t: usize) -> f64 {
        self.net.forward(&self.input(pair, t)).expect("encoder matches network input")[0]
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut DenseNet {
        &mut self.net
    }

    pub fn bind(&self, g: &mut Graph) -> DenseVars {
        self.net.bind(g)
    }

    pub fn reward_graph(&self, g: &mut Graph, v: &DenseVars, pair: Pair, t: usize) -> Var {
        let x = g.constant(self.input(pair, t));
        self.net.forward_graph(g, v, x)
    }
}

impl Module for StepRewardModel {
    fn params(&self) -> Vec<&Param> {
        self.net.params()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.net.params_mut()
    }
}
