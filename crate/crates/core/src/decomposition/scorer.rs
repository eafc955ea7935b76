use crate::env::mdp::EnumeratedMdp;
use crate::env::trajectory::Pair;

/// Anything that assigns a real value to a contiguous run of pairs.
///
/// Scoring is incremental so that oracles can walk a prefix tree and extend
/// a shared prefix by one pair at a time. The empty segment always scores 0;
/// `readout` is only called after at least one `push`.
pub trait SegmentScorer {
    type State: Clone;

    fn start(&self) -> Self::State;
    fn push(&self, state: &mut Self::State, pair: Pair);
    fn readout(&self, state: &Self::State) -> f64;

    fn score(&self, segment: &[Pair]) -> f64 {
        if segment.is_empty() {
            return 0.0;
        }
        let mut st = self.start();
        for &p in segment {
            self.push(&mut st, p);
        }
        self.readout(&st)
    }

    /// `[R(∅), R(seg[..1]), ..., R(seg)]`, so `len + 1` values with a leading 0.
    fn prefix_scores(&self, segment: &[Pair]) -> Vec<f64> {
        let mut out = Vec::with_capacity(segment.len() + 1);
        out.push(0.0);
        let mut st = self.start();
        for &p in segment {
            self.push(&mut st, p);
            out.push(self.readout(&st));
        }
        out
    }
}

impl<S: SegmentScorer + ?Sized> SegmentScorer for &S {
    type State = S::State;

    fn start(&self) -> Self::State {
        (**self).start()
    }

    fn push(&self, state: &mut Self::State, pair: Pair) {
        (**self).push(state, pair)
    }

    fn readout(&self, state: &Self::State) -> f64 {
        (**self).readout(state)
    }
}

/// Wraps an arbitrary function of the whole segment.
pub struct FnScorer<F>(pub F);

impl<F: Fn(&[Pair]) -> f64> SegmentScorer for FnScorer<F> {
    type State = Vec<Pair>;

    fn start(&self) -> Self::State {
        Vec::new()
    }

    fn push(&self, state: &mut Self::State, pair: Pair) {
        state.push(pair);
    }

    fn readout(&self, state: &Self::State) -> f64 {
        (self.0)(state)
    }
}

/// Sum of a per-pair table: `R(seg) = sum f(s, a)`.
#[derive(Clone, Debug)]
pub struct AdditiveScorer {
    pub n_actions: usize,
    pub table: Vec<f64>,
}

impl AdditiveScorer {
    /// The scorer whose segment values are partial sums of the hidden reward.
    pub fn hidden_partial_sums(mdp: &EnumeratedMdp) -> Self {
        let mut table = Vec::with_capacity(mdp.n_states() * mdp.n_actions());
        for s in 0..mdp.n_states() {
            for a in 0..mdp.n_actions() {
                table.push(mdp.hidden_reward(s, a));
            }
        }
        Self {
            n_actions: mdp.n_actions(),
            table,
        }
    }
}

impl SegmentScorer for AdditiveScorer {
    type State = f64;

    fn start(&self) -> f64 {
        0.0
    }

    fn push(&self, state: &mut f64, (s, a): Pair) {
        *state += self.table[s * self.n_actions + a];
    }

    fn readout(&self, state: &f64) -> f64 {
        *state
    }
}

/// Replaces the value of any full-horizon segment with the true episodic
/// return, leaving shorter segments to the inner scorer. This enforces
/// `R(tau_0:T) = R_ep` exactly on an MDP without terminal states.
pub struct ReturnCorrected<'a, S> {
    pub inner: S,
    pub mdp: &'a EnumeratedMdp,
}

impl<S: SegmentScorer> SegmentScorer for ReturnCorrected<'_, S> {
    type State = (S::State, usize, f64);

    fn start(&self) -> Self::State {
        (self.inner.start(), 0, 0.0)
    }

    fn push(&self, state: &mut Self::State, (s, a): Pair) {
        self.inner.push(&mut state.0, (s, a));
        state.1 += 1;
        state.2 += self.mdp.hidden_reward(s, a);
    }

    fn readout(&self, state: &Self::State) -> f64 {
        if state.1 == self.mdp.horizon() {
            state.2
        } else {
            self.inner.readout(&state.0)
        }
    }
}
