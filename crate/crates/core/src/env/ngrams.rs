use crate::env::{BackwardPolicy, Environment, SequenceOracle};
use crate::error::{invalid, Error, Result};
use crate::pareto::{ObjectiveVector, Payload};

/// The twenty amino-acid letters used as the default vocabulary.
pub const AMINO_ACIDS: &str = "ARNDCEQGHILKMFPSTWYV";

/// A prefix of letter indices; `done` once end-of-sequence was emitted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SeqState {
    pub tokens: Vec<u8>,
    pub done: bool,
}

/// Left-to-right string generation scored by n-gram occurrence counts.
///
/// Actions `0..A` append a letter, action `A` ends the sequence. The empty
/// string is not a valid object, and a sequence of `max_len` letters must end.
#[derive(Clone, Debug)]
pub struct NGrams {
    alphabet: Vec<char>,
    max_len: usize,
    patterns: Vec<String>,
}

/// Overlapping occurrence counts of every pattern in `x`.
pub fn ngram_counts(x: &str, patterns: &[String]) -> Vec<usize> {
    let chars: Vec<char> = x.chars().collect();
    patterns
        .iter()
        .map(|p| {
            let p: Vec<char> = p.chars().collect();
            if p.is_empty() || p.len() > chars.len() {
                0
            } else {
                chars.windows(p.len()).filter(|w| *w == p.as_slice()).count()
            }
        })
        .collect()
}

impl NGrams {
    pub fn new(alphabet: &str, max_len: usize, patterns: Vec<String>) -> Result<Self> {
        let alphabet: Vec<char> = alphabet.chars().collect();
        if alphabet.is_empty() || alphabet.len() > u8::MAX as usize {
            return Err(invalid("alphabet must hold between 1 and 255 letters"));
        }
        let mut sorted = alphabet.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != alphabet.len() {
            return Err(invalid("alphabet letters must be distinct"));
        }
        if max_len == 0 {
            return Err(invalid("maximum length must be positive"));
        }
        if patterns.is_empty() {
            return Err(invalid("at least one n-gram pattern is required"));
        }
        for p in &patterns {
            let n = p.chars().count();
            if n == 0 || n > max_len {
                return Err(invalid(format!("pattern `{p}` must have length in 1..={max_len}")));
            }
        }
        Ok(Self { alphabet, max_len, patterns })
    }

    /// Amino-acid vocabulary.
    pub fn amino(max_len: usize, patterns: &[&str]) -> Result<Self> {
        Self::new(AMINO_ACIDS, max_len, patterns.iter().map(|s| s.to_string()).collect())
    }

    pub fn alphabet(&self) -> &[char] {
        &self.alphabet
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn patterns(&self) -> &[String] {
        &self.patterns
    }

    pub fn eos(&self) -> usize {
        self.alphabet.len()
    }

    pub fn decode(&self, tokens: &[u8]) -> String {
        tokens.iter().map(|&t| self.alphabet[t as usize]).collect()
    }

    pub fn tokenize(&self, text: &str) -> Result<Vec<u8>> {
        text.chars()
            .map(|c| {
                self.alphabet
                    .iter()
                    .position(|&a| a == c)
                    .map(|i| i as u8)
                    .ok_or_else(|| invalid(format!("letter `{c}` is not in the alphabet")))
            })
            .collect()
    }

    /// Counts normalized by the number of windows in a maximal-length string.
    pub fn score(&self, x: &str) -> Result<ObjectiveVector> {
        let counts = ngram_counts(x, &self.patterns);
        ObjectiveVector::new(
            counts
                .iter()
                .zip(&self.patterns)
                .map(|(&c, p)| c as f64 / (self.max_len - p.chars().count() + 1) as f64)
                .collect(),
        )
    }
}

impl SequenceOracle for NGrams {
    fn num_objectives(&self) -> usize {
        self.patterns.len()
    }

    fn evaluate(&self, sequence: &str) -> Result<ObjectiveVector> {
        if sequence.chars().count() > self.max_len {
            return Err(invalid(format!("sequence longer than {}", self.max_len)));
        }
        self.score(sequence)
    }
}

impl Environment for NGrams {
    type State = SeqState;

    fn num_actions(&self) -> usize {
        self.alphabet.len() + 1
    }

    fn num_objectives(&self) -> usize {
        self.patterns.len()
    }

    fn initial_state(&self) -> SeqState {
        SeqState { tokens: Vec::new(), done: false }
    }

    fn action_mask(&self, s: &SeqState) -> Vec<bool> {
        let mut mask = vec![false; self.num_actions()];
        if s.done {
            return mask;
        }
        let room = s.tokens.len() < self.max_len;
        mask[..self.alphabet.len()].fill(room);
        mask[self.eos()] = !s.tokens.is_empty();
        mask
    }

    fn step(&self, s: &SeqState, action: usize) -> Result<SeqState> {
        let ok = self.action_mask(s).get(action).copied().unwrap_or(false);
        if !ok {
            return Err(Error::InvalidAction {
                action,
                reason: format!("not allowed after {} letters", s.tokens.len()),
            });
        }
        let mut next = s.clone();
        if action == self.eos() {
            next.done = true;
        } else {
            next.tokens.push(action as u8);
        }
        Ok(next)
    }

    fn is_terminal(&self, s: &SeqState) -> bool {
        s.done
    }

    fn parents(&self, s: &SeqState) -> Vec<(SeqState, usize)> {
        if s.done {
            return vec![(SeqState { tokens: s.tokens.clone(), done: false }, self.eos())];
        }
        match s.tokens.split_last() {
            Some((&last, rest)) => vec![(SeqState { tokens: rest.to_vec(), done: false }, last as usize)],
            None => Vec::new(),
        }
    }

    fn objectives(&self, s: &SeqState) -> Result<ObjectiveVector> {
        self.score(&self.decode(&s.tokens))
    }

    fn payload(&self, s: &SeqState) -> Payload {
        Payload::Sequence(self.decode(&s.tokens))
    }

    /// One-hot grid of `max_len` rows over letters plus a pad column, then
    /// the length fraction.
    fn encoding_len(&self) -> usize {
        self.max_len * (self.alphabet.len() + 1) + 1
    }

    fn encode_state(&self, s: &SeqState, out: &mut [f64]) {
        out.fill(0.0);
        let width = self.alphabet.len() + 1;
        for pos in 0..self.max_len {
            let col = s.tokens.get(pos).map(|&t| t as usize).unwrap_or(self.alphabet.len());
            out[pos * width + col] = 1.0;
        }
        out[self.max_len * width] = s.tokens.len() as f64 / self.max_len as f64;
    }

    fn backward_policy(&self) -> BackwardPolicy {
        BackwardPolicy::Trivial
    }

    fn max_trajectory_len(&self) -> usize {
        self.max_len + 1
    }
}
