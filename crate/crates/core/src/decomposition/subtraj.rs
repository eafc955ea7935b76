use rand::Rng;

use crate::decomposition::scorer::SegmentScorer;
use crate::env::trajectory::{Pair, PairEncoder};
use crate::error::Result;
use crate::nn::graph::{matvec, Graph, Var};
use crate::nn::gru::{GruCell, GruVars};
use crate::nn::param::{Module, Param};

/// GRU hidden size used when nothing else is configured.
pub const DEFAULT_GRU_HIDDEN: usize = 64;

/// Recurrent segment scorer: a GRU over one-hot pair encodings from a zero
/// initial state, read out linearly from the final hidden state. The empty
/// segment bypasses the network and scores exactly 0.
#[derive(Clone, Debug)]
pub struct SubTrajRewardModel {
    encoder: PairEncoder,
    cell: GruCell,
    head_w: Param,
    head_b: Param,
}

#[derive(Clone, Debug)]
pub struct SubTrajVars {
    cell: GruVars,
    head_w: Var,
    head_b: Var,
}

impl SubTrajRewardModel {
    pub fn new<R: Rng + ?Sized>(name: &str, encoder: PairEncoder, hidden: usize, rng: &mut R) -> Self {
        let cell = GruCell::new(&format!("{name}.gru"), encoder.dim(), hidden, rng);
        let bound = 1.0 / (hidden as f64).sqrt();
        Self {
            encoder,
            cell,
            head_w: Param::uniform(format!("{name}.head_w"), 1, hidden, bound, rng),
            head_b: Param::uniform(format!("{name}.head_b"), 1, 1, bound, rng),
        }
    }

    pub fn encoder(&self) -> PairEncoder {
        self.encoder
    }

    pub fn hidden_dim(&self) -> usize {
        self.cell.hidden_dim()
    }

    pub fn head_bias(&self) -> f64 {
        self.head_b.data[0]
    }

    pub fn set_head_bias(&mut self, b: f64) {
        self.head_b.data[0] = b;
    }

    /// Read-out applied to an arbitrary hidden state.
    pub fn head(&self, h: &[f64]) -> f64 {
        matvec(&self.head_w.data, 1, h.len(), h)[0] + self.head_b.data[0]
    }

    /// Scores of `segment[..k]` for `k = 1..=len`, recorded on the graph.
    pub fn prefix_graph(&self, g: &mut Graph, v: &SubTrajVars, segment: &[Pair]) -> Vec<Var> {
        let mut h = g.constant(vec![0.0; self.hidden_dim()]);
        let mut out = Vec::with_capacity(segment.len());
        for &p in segment {
            let x = g.constant(self.encoder.encode(p));
            h = GruCell::step_graph(g, &v.cell, x, h);
            let wh = g.matvec(v.head_w, h);
            out.push(g.add(wh, v.head_b));
        }
        out
    }

    /// Score of a whole segment on the graph; `None` for the empty segment.
    pub fn segment_graph(&self, g: &mut Graph, v: &SubTrajVars, segment: &[Pair]) -> Option<Var> {
        if segment.is_empty() {
            return None;
        }
        let mut h = g.constant(vec![0.0; self.hidden_dim()]);
        for &p in segment {
            let x = g.constant(self.encoder.encode(p));
            h = GruCell::step_graph(g, &v.cell, x, h);
        }
        let wh = g.matvec(v.head_w, h);
        Some(g.add(wh, v.head_b))
    }

    pub fn bind(&self, g: &mut Graph) -> SubTrajVars {
        SubTrajVars {
            cell: self.cell.bind(g),
            head_w: g.param(&self.head_w),
            head_b: g.param(&self.head_b),
        }
    }

    /// Hidden states after each pair of `segment`, starting from zero.
    pub fn hidden_states(&self, segment: &[Pair]) -> Result<Vec<Vec<f64>>> {
        let inputs: Vec<Vec<f64>> = segment.iter().map(|&p| self.encoder.encode(p)).collect();
        self.cell.forward(&inputs, &vec![0.0; self.hidden_dim()])
    }
}

impl SegmentScorer for SubTrajRewardModel {
    type State = Vec<f64>;

    fn start(&self) -> Vec<f64> {
        vec![0.0; self.hidden_dim()]
    }

    fn push(&self, state: &mut Vec<f64>, pair: Pair) {
        *state = self.cell.step(&self.encoder.encode(pair), state);
    }

    fn readout(&self, state: &Vec<f64>) -> f64 {
        self.head(state)
    }
}

impl Module for SubTrajRewardModel {
    fn params(&self) -> Vec<&Param> {
        let mut p = self.cell.params();
        p.push(&self.head_w);
        p.push(&self.head_b);
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.cell.params_mut();
        p.push(&mut self.head_w);
        p.push(&mut self.head_b);
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(seed: u64) -> SubTrajRewardModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SubTrajRewardModel::new("psi", PairEncoder::new(4, 2), 6, &mut rng)
    }

    #[test]
    fn empty_segment_is_zero() {
        for seed in 0..5 {
            assert_eq!(model(seed).score(&[]), 0.0);
        }
    }

    #[test]
    fn zero_parameters_read_out_bias() {
        let mut m = model(1);
        m.zero_params();
        assert_eq!(m.score(&[(0, 1), (3, 0)]), 0.0);
        m.set_head_bias(0.25);
        assert_eq!(m.score(&[(0, 1), (3, 0)]), 0.25);
    }

    #[test]
    fn graph_matches_plain() {
        let m = model(2);
        let seg = [(0, 1), (2, 0), (3, 1)];
        let mut g = Graph::new();
        let v = m.bind(&mut g);
        let prefixes = m.prefix_graph(&mut g, &v, &seg);
        let plain = m.prefix_scores(&seg);
        for (k, var) in prefixes.iter().enumerate() {
            assert_eq!(g.scalar_value(*var), plain[k + 1]);
        }
        let whole = m.segment_graph(&mut g, &v, &seg).unwrap();
        assert_eq!(g.scalar_value(whole), m.score(&seg));
        assert!(m.segment_graph(&mut g, &v, &[]).is_none());
    }
}
