use std::collections::HashMap;
use std::sync::Mutex;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Environment, MutationEnv, MutationState};
use crate::error::{invalid, Result};
use crate::gflownet::{train_with_reward, ConditionalPolicyNet, LogReward, TrainConfig};
use crate::metrics::HvRef;
use crate::mobo::{NehviContext, ParetoPool, Posterior};
use crate::pareto::Preference;
use crate::scalarize::DEFAULT_FLOOR;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposerConfig {
    pub max_mutations: usize,
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_z: f64,
    pub delta: f64,
    pub hidden: Vec<usize>,
}

impl Default for ProposerConfig {
    fn default() -> Self {
        Self { max_mutations: 4, steps: 500, batch_size: 16, lr: 0.001, lr_z: 0.01, delta: 0.05, hidden: vec![64, 64] }
    }
}

/// `β · ln max(NEHVI(x'), floor)` of the mutated sequence. Scores are
/// memoized per sequence.
pub struct AcquisitionReward<'a, P: Posterior + ?Sized> {
    posterior: &'a P,
    context: NehviContext,
    beta: f64,
    cache: Mutex<HashMap<String, f64>>,
}

impl<'a, P: Posterior + ?Sized> AcquisitionReward<'a, P> {
    pub fn new(posterior: &'a P, context: NehviContext, beta: f64) -> Self {
        Self { posterior, context, beta, cache: Mutex::new(HashMap::new()) }
    }

    /// Acquisition value before the floor.
    pub fn score(&self, seq: &str) -> Result<f64> {
        if let Some(&v) = self.cache.lock().expect("cache lock").get(seq) {
            return Ok(v);
        }
        let v = self.context.score(self.posterior, seq)?;
        self.cache.lock().expect("cache lock").insert(seq.to_string(), v);
        Ok(v)
    }
}

impl<P: Posterior + ?Sized> LogReward<MutationEnv> for AcquisitionReward<'_, P> {
    fn preference_dim(&self, _: &MutationEnv) -> Option<usize> {
        None
    }

    fn log_reward(&self, env: &MutationEnv, terminal: &MutationState, _: &Preference) -> Result<f64> {
        Ok(self.beta * self.score(&env.sequence(terminal))?.max(DEFAULT_FLOOR).ln())
    }
}

/// Trains a preference-free GFlowNet over mutation sets of the pool
/// sequences, rewarded by the acquisition value of the mutated sequence.
#[allow(clippy::too_many_arguments)]
pub fn train_mutation_proposer<P: Posterior + ?Sized>(
    pool: &ParetoPool,
    posterior: &P,
    committed: &[String],
    beta: f64,
    cfg: &ProposerConfig,
    alphabet: &str,
    reference: &HvRef,
    seed: u64,
) -> Result<(MutationEnv, ConditionalPolicyNet)> {
    if pool.is_empty() {
        return Err(invalid("the proposer needs a non-empty pool"));
    }
    let env = MutationEnv::new(&pool.sequences, alphabet, cfg.max_mutations)?;
    let context = NehviContext::new(posterior, pool, committed, reference)?;
    let reward = AcquisitionReward::new(posterior, context, beta);
    let train = TrainConfig {
        beta,
        delta: cfg.delta,
        steps: cfg.steps,
        batch_size: cfg.batch_size,
        lr: cfg.lr,
        lr_z: cfg.lr_z,
        hidden: cfg.hidden.clone(),
        seed,
        ..TrainConfig::default()
    };
    let out = train_with_reward(&env, &reward, &train, |_, _| Ok(()))?;
    Ok((env, out.policy))
}

/// A uniformly random mutant of a uniformly chosen pool sequence with
/// between 1 and `max_mutations` substitutions.
pub fn random_mutant<R: Rng + ?Sized>(env: &MutationEnv, rng: &mut R) -> Result<MutationState> {
    let base = rng.random_range(0..env.num_bases());
    let len = env.seq_len();
    let count = rng.random_range(1..=env.max_mutations().min(len));
    let mut state = env.start(base);
    for loc in sample(rng, len, count).into_iter() {
        let choices: Vec<usize> = env
            .valid_actions(&state)
            .into_iter()
            .filter(|&a| env.decode_action(a).is_some_and(|(l, _)| l == loc))
            .collect();
        let a = choices[rng.random_range(0..choices.len())];
        state = env.step(&state, a)?;
    }
    env.step(&state, env.stop_action())
}
