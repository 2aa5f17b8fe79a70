//! Environments: finite DAGs of partial objects with multi-objective rewards
//! on terminal states.
//!
//! Every environment here is *graded*: each action advances the trajectory
//! length by one and every path to a state has the same length. Exact
//! distribution computations rely on that to process states level by level.

mod hypergrid;
mod mutation;
mod ngrams;
pub mod testfns;

use std::collections::BTreeSet;
use std::fmt::Debug;
use std::hash::Hash;

use rand::Rng;

use crate::error::{Error, Result};
use crate::pareto::{ObjectiveVector, Payload};

pub use hypergrid::{GridState, HyperGrid, GRID_INC_0, GRID_INC_1, GRID_STOP};
pub use mutation::{mutation_apply, Mutation, MutationEnv, MutationState};
pub use ngrams::{ngram_counts, NGrams, SeqState, AMINO_ACIDS};

/// Upper bound on states visited by exhaustive enumeration.
pub const ENUMERATION_LIMIT: usize = 1_000_000;

/// Analytic backward policy of an environment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackwardPolicy {
    /// Every state has exactly one parent; `P_B = 1`.
    Trivial,
    /// Uniform over the parents of the child state.
    UniformParents,
}

/// Objective oracle over letter sequences.
pub trait SequenceOracle: Send + Sync {
    fn num_objectives(&self) -> usize;
    fn evaluate(&self, sequence: &str) -> Result<ObjectiveVector>;
}

pub trait Environment: Sync {
    type State: Clone + Eq + Hash + Ord + Debug + Send + Sync;

    /// Size of the (fixed) action space.
    fn num_actions(&self) -> usize;

    fn num_objectives(&self) -> usize;

    fn initial_state(&self) -> Self::State;

    /// Start state of one episode. Environments with several roots (a pool of
    /// base sequences) draw one uniformly.
    fn sample_initial_state(&self, _rng: &mut dyn rand::RngCore) -> Self::State {
        self.initial_state()
    }

    /// `mask[a]` is true iff action `a` is valid in `state`.
    fn action_mask(&self, state: &Self::State) -> Vec<bool>;

    fn step(&self, state: &Self::State, action: usize) -> Result<Self::State>;

    fn is_terminal(&self, state: &Self::State) -> bool;

    /// Every `(parent, action)` with `step(parent, action) == state`.
    fn parents(&self, state: &Self::State) -> Vec<(Self::State, usize)>;

    fn objectives(&self, terminal: &Self::State) -> Result<ObjectiveVector>;

    fn payload(&self, terminal: &Self::State) -> Payload;

    fn encoding_len(&self) -> usize;

    /// Writes the fixed-size encoding of `state` into `out`.
    fn encode_state(&self, state: &Self::State, out: &mut [f64]);

    /// Length of the per-episode context given to the partition-function head.
    fn context_len(&self) -> usize {
        0
    }

    fn encode_context(&self, _initial: &Self::State, _out: &mut [f64]) {}

    fn backward_policy(&self) -> BackwardPolicy;

    /// `log P_B(parent | child)` for one transition into `child`.
    fn log_backward(&self, child: &Self::State) -> f64 {
        match self.backward_policy() {
            BackwardPolicy::Trivial => 0.0,
            BackwardPolicy::UniformParents => uniform_parent_log_prob(self, child),
        }
    }

    /// Longest possible trajectory, counting the terminating action.
    fn max_trajectory_len(&self) -> usize;

    fn valid_actions(&self, state: &Self::State) -> Vec<usize> {
        self.action_mask(state)
            .iter()
            .enumerate()
            .filter_map(|(a, &ok)| ok.then_some(a))
            .collect()
    }
}

/// `-ln |parents(child)|`, valid for any environment.
pub fn uniform_parent_log_prob<E: Environment + ?Sized>(env: &E, child: &E::State) -> f64 {
    let n = env.parents(child).len();
    if n <= 1 {
        0.0
    } else {
        -(n as f64).ln()
    }
}

/// Encodes `state` into a freshly allocated vector.
pub fn encode<E: Environment + ?Sized>(env: &E, state: &E::State) -> Vec<f64> {
    let mut out = vec![0.0; env.encoding_len()];
    env.encode_state(state, &mut out);
    out
}

pub fn sample_uniform_action<R: Rng + ?Sized>(mask: &[bool], rng: &mut R) -> Option<usize> {
    let valid: Vec<usize> = mask.iter().enumerate().filter_map(|(a, &m)| m.then_some(a)).collect();
    if valid.is_empty() {
        None
    } else {
        Some(valid[rng.random_range(0..valid.len())])
    }
}

/// Levels of the DAG reachable from the initial state: `levels[k]` holds the
/// states reached after exactly `k` actions, in sorted order.
pub fn enumerate_levels<E: Environment + ?Sized>(env: &E) -> Result<Vec<Vec<E::State>>> {
    let mut levels = vec![vec![env.initial_state()]];
    let mut seen = 1usize;
    loop {
        let mut next = BTreeSet::new();
        for s in levels.last().unwrap() {
            if env.is_terminal(s) {
                continue;
            }
            for a in env.valid_actions(s) {
                next.insert(env.step(s, a)?);
            }
        }
        if next.is_empty() {
            break;
        }
        seen += next.len();
        if seen > ENUMERATION_LIMIT {
            return Err(Error::StateSpaceTooLarge { limit: ENUMERATION_LIMIT });
        }
        levels.push(next.into_iter().collect());
    }
    Ok(levels)
}

/// Every terminal state reachable from the initial state, sorted.
pub fn enumerate_terminals<E: Environment + ?Sized>(env: &E) -> Result<Vec<E::State>> {
    let mut out: Vec<E::State> = enumerate_levels(env)?
        .into_iter()
        .flatten()
        .filter(|s| env.is_terminal(s))
        .collect();
    out.sort();
    Ok(out)
}
