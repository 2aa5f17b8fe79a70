use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{MutationEnv, SequenceOracle, AMINO_ACIDS};
use crate::error::{invalid, Result};
use crate::gflownet::sample_trajectories;
use crate::metrics::{hypervolume, HvRef};
use crate::mobo::{
    fit_surrogate, random_mutant, train_mutation_proposer, ALDataset, Featurizer, NehviContext, ParetoPool,
    ProposerConfig, SurrogateConfig,
};
use crate::pareto::{Front, Preference};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposerKind {
    /// Mutation-set GFlowNet trained on the acquisition each round.
    Gflownet,
    /// Uniformly random mutants of pool sequences.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ALConfig {
    pub alphabet: String,
    pub seq_len: usize,
    pub initial_size: usize,
    pub rounds: usize,
    pub batch_size: usize,
    pub kmer: usize,
    pub surrogate: SurrogateConfig,
    pub proposer: ProposerConfig,
    pub proposer_kind: ProposerKind,
    pub beta: f64,
    /// Subtracted from β after every round, never going below 1.
    pub beta_decrement: f64,
    /// Distinct new candidates gathered before batch selection.
    pub num_proposals: usize,
    /// Proposal attempts before falling back to random mutants.
    pub retry_cap: usize,
    /// Every component of the hypervolume reference point.
    pub hv_ref: f64,
    pub seed: u64,
}

impl Default for ALConfig {
    fn default() -> Self {
        Self {
            alphabet: AMINO_ACIDS.to_string(),
            seq_len: 24,
            initial_size: 32,
            rounds: 16,
            batch_size: 16,
            kmer: 2,
            surrogate: SurrogateConfig::default(),
            proposer: ProposerConfig::default(),
            proposer_kind: ProposerKind::Gflownet,
            beta: 8.0,
            beta_decrement: 0.5,
            num_proposals: 64,
            retry_cap: 5,
            hv_ref: -0.1,
            seed: 0,
        }
    }
}

impl ALConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alphabet.chars().count() < 2 {
            return Err(invalid("the alphabet needs at least two letters"));
        }
        if self.seq_len == 0 || self.initial_size < 2 || self.batch_size == 0 {
            return Err(invalid("seq_len and batch_size must be positive and initial_size at least 2"));
        }
        if self.num_proposals < self.batch_size {
            return Err(invalid("num_proposals must be at least batch_size"));
        }
        if !(self.beta >= 1.0 && self.beta.is_finite()) {
            return Err(invalid(format!("beta must be at least 1, got {}", self.beta)));
        }
        if !(self.beta_decrement >= 0.0 && self.beta_decrement.is_finite()) {
            return Err(invalid("beta_decrement must be non-negative"));
        }
        if !(self.hv_ref <= 0.0 && self.hv_ref.is_finite()) {
            return Err(invalid("hv_ref must be at most 0 for objectives in [0, 1]"));
        }
        if self.proposer.max_mutations == 0 {
            return Err(invalid("max_mutations must be at least 1"));
        }
        self.surrogate.validate()
    }
}

/// State of the loop after one round. Round 0 describes the initial data.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub oracle_calls: usize,
    pub hypervolume: f64,
    /// Hypervolume of the current front over that of the initial front.
    pub relative_hv: f64,
    /// β used by the proposer this round.
    pub beta: f64,
    /// Candidates drawn as random mutants after the proposer ran out of
    /// retries.
    pub random_fills: usize,
    pub front: Front,
}

#[derive(Clone, Debug)]
pub struct ALOutcome {
    pub rounds: Vec<RoundRecord>,
    pub dataset: ALDataset,
}

fn random_sequence<R: Rng + ?Sized>(alphabet: &[char], len: usize, rng: &mut R) -> String {
    (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect()
}

/// Runs the rounds of batched active learning against `oracle`.
pub fn run_al_loop(oracle: &dyn SequenceOracle, cfg: &ALConfig) -> Result<ALOutcome> {
    run_al_loop_observed(oracle, cfg, |_| Ok(()))
}

/// As [`run_al_loop`], calling `observe` with every round record.
pub fn run_al_loop_observed<F>(oracle: &dyn SequenceOracle, cfg: &ALConfig, mut observe: F) -> Result<ALOutcome>
where
    F: FnMut(&RoundRecord) -> Result<()>,
{
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let alphabet: Vec<char> = cfg.alphabet.chars().collect();
    let featurizer = Featurizer::new(&cfg.alphabet, cfg.kmer, cfg.seq_len)?;
    let reference = HvRef::constant(oracle.num_objectives(), cfg.hv_ref)?;

    let mut data = ALDataset::default();
    let mut oracle_calls = 0;
    while data.len() < cfg.initial_size {
        let seq = random_sequence(&alphabet, cfg.seq_len, &mut rng);
        if data.sequences().contains(seq.as_str()) {
            continue;
        }
        let y = oracle.evaluate(&seq)?;
        oracle_calls += 1;
        data.push(seq, y)?;
    }
    let front = ParetoPool::from_dataset(&data)?.front()?;
    let hv0 = hypervolume(&front, &reference)?;
    if hv0 <= 0.0 {
        return Err(invalid("the initial front has zero hypervolume; lower hv_ref"));
    }
    let mut rounds = vec![RoundRecord {
        round: 0,
        oracle_calls,
        hypervolume: hv0,
        relative_hv: 1.0,
        beta: cfg.beta,
        random_fills: 0,
        front,
    }];
    observe(&rounds[0])?;

    let mut beta = cfg.beta;
    for round in 1..=cfg.rounds {
        data.round = round;
        let round_seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add(round as u64);
        let surrogate = fit_surrogate(
            &data.entries,
            &featurizer,
            &SurrogateConfig { seed: round_seed, ..cfg.surrogate.clone() },
        )?;
        let pool = ParetoPool::from_dataset(&data)?;
        let known: HashSet<String> = data.entries.iter().map(|(s, _)| s.clone()).collect();
        let mut proposals: Vec<String> = Vec::with_capacity(cfg.num_proposals);
        let mut seen: HashSet<String> = HashSet::new();
        let mut accept = |seq: String, proposals: &mut Vec<String>| {
            if !known.contains(&seq) && seen.insert(seq.clone()) {
                proposals.push(seq);
            }
        };
        let env = match cfg.proposer_kind {
            ProposerKind::Gflownet => {
                let (env, policy) = train_mutation_proposer(
                    &pool,
                    &surrogate,
                    &[],
                    beta,
                    &cfg.proposer,
                    &cfg.alphabet,
                    &reference,
                    round_seed,
                )?;
                let free = Preference::new(vec![1.0])?;
                for _ in 0..cfg.retry_cap {
                    if proposals.len() >= cfg.num_proposals {
                        break;
                    }
                    let need = cfg.num_proposals - proposals.len();
                    for t in sample_trajectories(&policy, &env, &free, need, 0.0, &mut rng)? {
                        accept(env.sequence(t.terminal()), &mut proposals);
                    }
                }
                env
            }
            ProposerKind::Random => MutationEnv::new(&pool.sequences, &cfg.alphabet, cfg.proposer.max_mutations)?,
        };
        let mut random_fills = 0;
        let mut attempts = 0;
        while proposals.len() < cfg.num_proposals && attempts < 100 * cfg.num_proposals {
            attempts += 1;
            let before = proposals.len();
            accept(env.sequence(&random_mutant(&env, &mut rng)?), &mut proposals);
            if cfg.proposer_kind == ProposerKind::Gflownet && proposals.len() > before {
                random_fills += 1;
            }
        }

        let mut ctx = NehviContext::new(&surrogate, &pool, &[], &reference)?;
        let mut remaining = proposals;
        let mut batch = Vec::with_capacity(cfg.batch_size);
        while batch.len() < cfg.batch_size && !remaining.is_empty() {
            let refs: Vec<&str> = remaining.iter().map(String::as_str).collect();
            let scores = ctx.score_batch(&surrogate, &refs)?;
            let best = scores
                .iter()
                .enumerate()
                .fold(0, |best, (i, s)| if *s > scores[best] { i } else { best });
            let chosen = remaining.remove(best);
            ctx.commit(&surrogate, &chosen)?;
            batch.push(chosen);
        }
        for seq in batch {
            let y = oracle.evaluate(&seq)?;
            oracle_calls += 1;
            data.push(seq, y)?;
        }

        let front = ParetoPool::from_dataset(&data)?.front()?;
        let hv = hypervolume(&front, &reference)?;
        rounds.push(RoundRecord {
            round,
            oracle_calls,
            hypervolume: hv,
            relative_hv: hv / hv0,
            beta,
            random_fills,
            front,
        });
        observe(rounds.last().expect("just pushed"))?;
        beta = (beta - cfg.beta_decrement).max(1.0);
    }
    Ok(ALOutcome { rounds, dataset: data })
}
