//! Multi-objective active learning with a mutation-set GFlowNet proposer.
//!
//! Each round fits a bootstrap ensemble to the observed data, trains a
//! proposer whose reward is the noisy expected hypervolume improvement of
//! the mutated sequence, greedily selects a batch by that acquisition and
//! queries the oracle for it.

mod acquisition;
mod al_loop;
mod proposer;
mod surrogate;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::pareto::ObjectiveVector;

pub use acquisition::{hvi, nehvi_score, NehviContext, ParetoPool, Posterior};
pub use al_loop::{run_al_loop, run_al_loop_observed, ALConfig, ALOutcome, ProposerKind, RoundRecord};
pub use proposer::{random_mutant, train_mutation_proposer, AcquisitionReward, ProposerConfig};
pub use surrogate::{fit_surrogate, regression_loss_and_grads, EnsembleSurrogate, SurrogateConfig};

/// Normalized k-mer counts for every `k' = 1..=k` plus relative length.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Featurizer {
    alphabet: Vec<char>,
    k: usize,
    max_len: usize,
}

impl Featurizer {
    pub fn new(alphabet: &str, k: usize, max_len: usize) -> Result<Self> {
        let alphabet: Vec<char> = alphabet.chars().collect();
        if alphabet.is_empty() {
            return Err(invalid("featurizer alphabet is empty"));
        }
        if k == 0 {
            return Err(invalid("k-mer size must be at least 1"));
        }
        if max_len == 0 {
            return Err(invalid("max_len must be positive"));
        }
        Ok(Self { alphabet, k, max_len })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `Σ_{k'} A^{k'} + 1`.
    pub fn dim(&self) -> usize {
        (1..=self.k).map(|j| self.alphabet.len().pow(j as u32)).sum::<usize>() + 1
    }

    /// Windows containing letters outside the alphabet are not counted.
    pub fn featurize(&self, seq: &str) -> Vec<f64> {
        let a = self.alphabet.len();
        let idx: Vec<Option<usize>> =
            seq.chars().map(|c| self.alphabet.iter().position(|&x| x == c)).collect();
        let n = idx.len();
        let mut out = vec![0.0; self.dim()];
        let mut offset = 0;
        for j in 1..=self.k {
            let width = a.pow(j as u32);
            if n >= j {
                let windows = (n - j + 1) as f64;
                for w in idx.windows(j) {
                    let code = w.iter().try_fold(0usize, |acc, t| t.map(|t| acc * a + t));
                    if let Some(code) = code {
                        out[offset + code] += 1.0 / windows;
                    }
                }
            }
            offset += width;
        }
        out[offset] = n as f64 / self.max_len as f64;
        out
    }
}

/// Observed `(sequence, objectives)` pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ALDataset {
    pub entries: Vec<(String, ObjectiveVector)>,
    pub round: usize,
}

impl ALDataset {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sequences(&self) -> HashSet<&str> {
        self.entries.iter().map(|(s, _)| s.as_str()).collect()
    }

    /// Adds a new observation; repeated sequences are rejected.
    pub fn push(&mut self, seq: String, y: ObjectiveVector) -> Result<()> {
        if self.entries.iter().any(|(s, _)| *s == seq) {
            return Err(invalid(format!("sequence `{seq}` is already in the dataset")));
        }
        self.entries.push((seq, y));
        Ok(())
    }
}
