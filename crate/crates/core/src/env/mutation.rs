use std::sync::Arc;

use crate::env::{BackwardPolicy, Environment, SequenceOracle};
use crate::error::{invalid, Error, Result};
use crate::pareto::{ObjectiveVector, Payload};

/// Substitute `token` at 0-indexed `location`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mutation {
    pub location: usize,
    pub token: char,
}

/// Applies a set of substitutions with pairwise distinct locations.
pub fn mutation_apply(x: &str, mutations: &[Mutation]) -> Result<String> {
    let mut chars: Vec<char> = x.chars().collect();
    let mut touched = vec![false; chars.len()];
    for m in mutations {
        if m.location >= chars.len() {
            return Err(invalid(format!("location {} outside a sequence of length {}", m.location, chars.len())));
        }
        if touched[m.location] {
            return Err(Error::InvalidAction {
                action: m.location,
                reason: "location mutated twice".into(),
            });
        }
        touched[m.location] = true;
        chars[m.location] = m.token;
    }
    Ok(chars.into_iter().collect())
}

/// A base sequence plus the substitutions applied so far, kept sorted by
/// location.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MutationState {
    pub base: usize,
    pub mutations: Vec<(usize, u8)>,
    pub done: bool,
}

/// Builds a set of at most `max_mutations` substitutions on one of a pool of
/// equal-length base sequences.
///
/// Action `l * A + v` writes letter `v` at location `l`; the last action
/// stops. A location can be mutated once, a substitution must change the
/// letter, and at least one substitution precedes the stop.
#[derive(Clone)]
pub struct MutationEnv {
    bases: Vec<Vec<u8>>,
    alphabet: Vec<char>,
    max_mutations: usize,
    oracle: Option<Arc<dyn SequenceOracle>>,
}

impl std::fmt::Debug for MutationEnv {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MutationEnv")
            .field("bases", &self.bases.len())
            .field("length", &self.seq_len())
            .field("max_mutations", &self.max_mutations)
            .finish()
    }
}

impl MutationEnv {
    pub fn new(bases: &[String], alphabet: &str, max_mutations: usize) -> Result<Self> {
        let alphabet: Vec<char> = alphabet.chars().collect();
        if alphabet.len() < 2 {
            return Err(invalid("mutations need an alphabet of at least two letters"));
        }
        if bases.is_empty() {
            return Err(invalid("at least one base sequence is required"));
        }
        if max_mutations == 0 {
            return Err(invalid("max_mutations must be positive"));
        }
        let encode = |s: &String| -> Result<Vec<u8>> {
            s.chars()
                .map(|c| {
                    alphabet
                        .iter()
                        .position(|&a| a == c)
                        .map(|i| i as u8)
                        .ok_or_else(|| invalid(format!("letter `{c}` is not in the alphabet")))
                })
                .collect()
        };
        let bases: Vec<Vec<u8>> = bases.iter().map(encode).collect::<Result<_>>()?;
        let len = bases[0].len();
        if len == 0 || bases.iter().any(|b| b.len() != len) {
            return Err(invalid("base sequences must be non-empty and of equal length"));
        }
        Ok(Self { bases, alphabet, max_mutations: max_mutations.min(len), oracle: None })
    }

    pub fn with_oracle(mut self, oracle: Arc<dyn SequenceOracle>) -> Self {
        self.oracle = Some(oracle);
        self
    }

    pub fn seq_len(&self) -> usize {
        self.bases[0].len()
    }

    pub fn num_bases(&self) -> usize {
        self.bases.len()
    }

    pub fn max_mutations(&self) -> usize {
        self.max_mutations
    }

    pub fn stop_action(&self) -> usize {
        self.seq_len() * self.alphabet.len()
    }

    pub fn action_for(&self, location: usize, token: char) -> Option<usize> {
        let v = self.alphabet.iter().position(|&a| a == token)?;
        (location < self.seq_len()).then_some(location * self.alphabet.len() + v)
    }

    /// `(location, letter index)` written by a substitution action.
    pub fn decode_action(&self, action: usize) -> Option<(usize, u8)> {
        (action < self.stop_action())
            .then(|| (action / self.alphabet.len(), (action % self.alphabet.len()) as u8))
    }

    pub fn start(&self, base: usize) -> MutationState {
        MutationState { base, mutations: Vec::new(), done: false }
    }

    /// The mutated sequence of `state`.
    pub fn sequence(&self, state: &MutationState) -> String {
        let mut tokens = self.bases[state.base].clone();
        for &(l, v) in &state.mutations {
            tokens[l] = v;
        }
        tokens.iter().map(|&t| self.alphabet[t as usize]).collect()
    }

    pub fn base_sequence(&self, base: usize) -> String {
        self.bases[base].iter().map(|&t| self.alphabet[t as usize]).collect()
    }

    pub fn mutations_of(&self, state: &MutationState) -> Vec<Mutation> {
        state
            .mutations
            .iter()
            .map(|&(location, v)| Mutation { location, token: self.alphabet[v as usize] })
            .collect()
    }
}

impl Environment for MutationEnv {
    type State = MutationState;

    fn num_actions(&self) -> usize {
        self.stop_action() + 1
    }

    fn num_objectives(&self) -> usize {
        self.oracle.as_ref().map_or(0, |o| o.num_objectives())
    }

    fn initial_state(&self) -> MutationState {
        self.start(0)
    }

    fn sample_initial_state(&self, rng: &mut dyn rand::RngCore) -> MutationState {
        use rand::Rng;
        self.start(rng.random_range(0..self.bases.len()))
    }

    fn action_mask(&self, s: &MutationState) -> Vec<bool> {
        let mut mask = vec![false; self.num_actions()];
        if s.done {
            return mask;
        }
        let a = self.alphabet.len();
        if s.mutations.len() < self.max_mutations {
            let base = &self.bases[s.base];
            for loc in 0..self.seq_len() {
                if s.mutations.iter().any(|&(l, _)| l == loc) {
                    continue;
                }
                for v in 0..a {
                    mask[loc * a + v] = v as u8 != base[loc];
                }
            }
        }
        mask[self.stop_action()] = !s.mutations.is_empty();
        mask
    }

    fn step(&self, s: &MutationState, action: usize) -> Result<MutationState> {
        if !self.action_mask(s).get(action).copied().unwrap_or(false) {
            return Err(Error::InvalidAction { action, reason: "masked in this state".into() });
        }
        let mut next = s.clone();
        match self.decode_action(action) {
            None => next.done = true,
            Some(m) => {
                let at = next.mutations.partition_point(|&(l, _)| l < m.0);
                next.mutations.insert(at, m);
            }
        }
        Ok(next)
    }

    fn is_terminal(&self, s: &MutationState) -> bool {
        s.done
    }

    fn parents(&self, s: &MutationState) -> Vec<(MutationState, usize)> {
        if s.done {
            return vec![(MutationState { done: false, ..s.clone() }, self.stop_action())];
        }
        let a = self.alphabet.len();
        (0..s.mutations.len())
            .map(|i| {
                let mut p = s.clone();
                let (l, v) = p.mutations.remove(i);
                (p, l * a + v as usize)
            })
            .collect()
    }

    fn objectives(&self, s: &MutationState) -> Result<ObjectiveVector> {
        let oracle = self.oracle.as_ref().ok_or_else(|| invalid("mutation environment has no oracle"))?;
        oracle.evaluate(&self.sequence(s))
    }

    fn payload(&self, s: &MutationState) -> Payload {
        Payload::Sequence(self.sequence(s))
    }

    /// One-hot of the current sequence, then a mask of mutated locations.
    fn encoding_len(&self) -> usize {
        self.seq_len() * (self.alphabet.len() + 1)
    }

    fn encode_state(&self, s: &MutationState, out: &mut [f64]) {
        out.fill(0.0);
        let a = self.alphabet.len();
        let n = self.seq_len();
        let mut tokens = self.bases[s.base].clone();
        for &(l, v) in &s.mutations {
            tokens[l] = v;
            out[n * a + l] = 1.0;
        }
        for (pos, &t) in tokens.iter().enumerate() {
            out[pos * a + t as usize] = 1.0;
        }
    }

    /// One-hot of the base sequence.
    fn context_len(&self) -> usize {
        self.seq_len() * self.alphabet.len()
    }

    fn encode_context(&self, initial: &MutationState, out: &mut [f64]) {
        out.fill(0.0);
        let a = self.alphabet.len();
        for (pos, &t) in self.bases[initial.base].iter().enumerate() {
            out[pos * a + t as usize] = 1.0;
        }
    }

    fn backward_policy(&self) -> BackwardPolicy {
        BackwardPolicy::UniformParents
    }

    fn max_trajectory_len(&self) -> usize {
        self.max_mutations + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::contract_tests::check_contract;
    use crate::env::{encode, enumerate_terminals, NGrams};

    fn m(location: usize, token: char) -> Mutation {
        Mutation { location, token }
    }

    #[test]
    fn apply_examples() {
        assert_eq!(mutation_apply("ACGT", &[m(1, 'T')]).unwrap(), "ATGT");
        assert_eq!(mutation_apply("ACGT", &[]).unwrap(), "ACGT");
        let a = mutation_apply("ACGT", &[m(0, 'G'), m(3, 'A')]).unwrap();
        let b = mutation_apply("ACGT", &[m(3, 'A'), m(0, 'G')]).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            mutation_apply("ACGT", &[m(1, 'T'), m(1, 'G')]),
            Err(Error::InvalidAction { .. })
        ));
        assert!(mutation_apply("ACGT", &[m(4, 'A')]).is_err());
    }

    fn oracle() -> Arc<NGrams> {
        Arc::new(NGrams::new("ABC", 3, vec!["AB".into(), "CA".into()]).unwrap())
    }

    fn small() -> MutationEnv {
        MutationEnv::new(&["ABA".to_string()], "ABC", 2).unwrap().with_oracle(oracle())
    }

    #[test]
    fn contract_holds() {
        check_contract(&small());
        check_contract(&MutationEnv::new(&["AB".into(), "CC".into()], "ABC", 2).unwrap().with_oracle(oracle()));
    }

    #[test]
    fn objectives_need_an_oracle() {
        let bare = MutationEnv::new(&["ABA".to_string()], "ABC", 2).unwrap();
        assert!(bare.objectives(&bare.initial_state()).is_err());
        let t = MutationState { base: 0, mutations: vec![(1, 2)], done: true };
        assert_eq!(small().objectives(&t).unwrap().values(), &[0.0, 0.5]);
    }

    #[test]
    fn masks_prevent_remutation_and_no_ops() {
        let env = small();
        let s0 = env.initial_state();
        let mask = env.action_mask(&s0);
        assert!(!mask[env.action_for(0, 'A').unwrap()]);
        assert!(mask[env.action_for(0, 'B').unwrap()]);
        assert!(!mask[env.stop_action()]);
        let s1 = env.step(&s0, env.action_for(1, 'C').unwrap()).unwrap();
        let mask = env.action_mask(&s1);
        assert!(!mask[env.action_for(1, 'A').unwrap()]);
        assert!(mask[env.stop_action()]);
        let s2 = env.step(&s1, env.action_for(0, 'C').unwrap()).unwrap();
        assert_eq!(env.valid_actions(&s2), vec![env.stop_action()]);
        let t = env.step(&s2, env.stop_action()).unwrap();
        assert_eq!(env.sequence(&t), "CCA");
        assert_eq!(env.mutations_of(&t), vec![m(0, 'C'), m(1, 'C')]);
    }

    #[test]
    fn sets_are_order_free() {
        let env = small();
        let s0 = env.initial_state();
        let (x, y) = (env.action_for(0, 'C').unwrap(), env.action_for(2, 'B').unwrap());
        let a = env.step(&env.step(&s0, x).unwrap(), y).unwrap();
        let b = env.step(&env.step(&s0, y).unwrap(), x).unwrap();
        assert_eq!(a, b);
        assert_eq!(env.parents(&a).len(), 2);
        assert_eq!(env.log_backward(&a), -(2f64).ln());
    }

    #[test]
    fn terminal_count() {
        // 3 locations x 2 alternative letters: 6 singles + 12 pairs.
        assert_eq!(enumerate_terminals(&small()).unwrap().len(), 18);
    }

    #[test]
    fn encoding_shows_sequence_and_mask() {
        let env = small();
        let s = env.step(&env.initial_state(), env.action_for(1, 'C').unwrap()).unwrap();
        let enc = encode(&env, &s);
        assert_eq!(enc.len(), 12);
        assert_eq!(&enc[..9], &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        assert_eq!(&enc[9..], &[0.0, 1.0, 0.0]);
        let mut ctx = vec![0.0; env.context_len()];
        env.encode_context(&s, &mut ctx);
        assert_eq!(ctx, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
    }
}
