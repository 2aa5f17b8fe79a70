//! Preference-conditional REINFORCE with a moving-average baseline.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{check_dim, invalid, Error, Result};
use crate::gflownet::{sample_trajectories, transition_rows, ConditionalPolicyNet, StepRecord, Trajectory};
use crate::neural::{adam_step, AdamState, MlpGrads};
use crate::scalarize::{sample_preference, DirichletParam, PreferenceEncoding, Scalarization};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReinforceConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub steps: usize,
    #[serde(default)]
    pub entropy_weight: f64,
    #[serde(default = "default_decay")]
    pub baseline_decay: f64,
    pub alpha: f64,
    pub scalarization: Scalarization,
    pub preference_bins: usize,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

fn default_decay() -> f64 {
    0.99
}

impl Default for ReinforceConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            batch_size: 16,
            steps: 1000,
            entropy_weight: 0.0,
            baseline_decay: default_decay(),
            alpha: 1.0,
            scalarization: Scalarization::default(),
            preference_bins: 0,
            hidden: vec![64, 64],
            seed: 0,
        }
    }
}

impl ReinforceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(invalid(format!("lr must be non-negative, got {}", self.lr)));
        }
        if self.batch_size == 0 || self.steps == 0 {
            return Err(invalid("batch_size and steps must be at least 1"));
        }
        if !(self.entropy_weight >= 0.0 && self.entropy_weight.is_finite()) {
            return Err(invalid("entropy_weight must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.baseline_decay) {
            return Err(invalid(format!("baseline_decay must lie in [0, 1), got {}", self.baseline_decay)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        self.scalarization.validate()
    }
}

/// Surrogate loss `−(1/B) Σ_i A_i Σ_t log P_F(a_t|s_t,ω) − (η/B) Σ_t H(P_F(·|s_t,ω))`
/// and its gradient with respect to the forward head.
pub fn reinforce_loss_batch<E: Environment + ?Sized>(
    policy: &ConditionalPolicyNet,
    env: &E,
    trajs: &[Trajectory<E::State>],
    advantages: &[f64],
    entropy_weight: f64,
) -> Result<(f64, MlpGrads)> {
    check_dim(trajs.len(), advantages.len())?;
    if trajs.is_empty() {
        return Err(invalid("empty trajectory batch"));
    }
    let rows = transition_rows(policy, env, trajs)?;
    let n = trajs.len() as f64;
    let mut loss = 0.0;
    let mut up = Array2::zeros(rows.logits.raw_dim());
    for (r, mut row) in up.rows_mut().into_iter().enumerate() {
        let lp = &rows.log_probs[r];
        let mask = &rows.masks[r];
        let adv = advantages[rows.owner[r]];
        let entropy: f64 = -(0..lp.len()).filter(|&j| mask[j]).map(|j| lp[j].exp() * lp[j]).sum::<f64>();
        loss -= (adv * lp[rows.actions[r]] + entropy_weight * entropy) / n;
        for (j, g) in row.iter_mut().enumerate() {
            if mask[j] {
                let p = lp[j].exp();
                let d_logp = f64::from(u8::from(j == rows.actions[r])) - p;
                let d_entropy = -p * (lp[j] + entropy);
                *g = -(adv * d_logp + entropy_weight * d_entropy) / n;
            }
        }
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("policy-gradient loss {loss}")));
    }
    let (grads, _) = policy.forward_net().backward_batch(&rows.cache, up.view(), false)?;
    Ok((loss, grads))
}

#[derive(Clone, Debug)]
pub struct ReinforceOutcome {
    pub policy: ConditionalPolicyNet,
    /// Mean scalarized reward of each training batch.
    pub mean_rewards: Vec<f64>,
    pub skipped: usize,
}

/// Trains a preference-conditional policy to maximize the scalarized reward.
pub fn train_moreinforce<E: Environment + ?Sized>(env: &E, cfg: &ReinforceConfig) -> Result<ReinforceOutcome> {
    train_moreinforce_observed(env, cfg, |_, _| Ok(()))
}

/// As [`train_moreinforce`], calling `observe` after every step.
pub fn train_moreinforce_observed<E, F>(env: &E, cfg: &ReinforceConfig, mut observe: F) -> Result<ReinforceOutcome>
where
    E: Environment + ?Sized,
    F: FnMut(&StepRecord, &ConditionalPolicyNet) -> Result<()>,
{
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = env.num_objectives();
    let encoding = PreferenceEncoding::from_bins(cfg.preference_bins);
    let mut policy = ConditionalPolicyNet::new(env, d, encoding, &cfg.hidden, &mut rng)?;
    let dirichlet = DirichletParam::new(cfg.alpha, d)?;
    let mut adam = AdamState::new(cfg.lr);
    let mut baseline: Option<f64> = None;
    let mut mean_rewards = Vec::with_capacity(cfg.steps);
    let mut skipped = 0;
    for step in 1..=cfg.steps {
        let omega = sample_preference(&dirichlet, &mut rng)?;
        let trajs = sample_trajectories(&policy, env, &omega, cfg.batch_size, 0.0, &mut rng)?;
        let rewards: Vec<f64> = trajs
            .iter()
            .map(|t| cfg.scalarization.scalarize(&env.objectives(t.terminal())?, &omega))
            .collect::<Result<_>>()?;
        let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
        mean_rewards.push(mean);
        let b = *baseline.get_or_insert(mean);
        let advantages: Vec<f64> = rewards.iter().map(|g| g - b).collect();
        let loss = match reinforce_loss_batch(&policy, env, &trajs, &advantages, cfg.entropy_weight) {
            Ok((loss, grads)) if grads.is_finite() => {
                let (forward, _) = policy.nets_mut();
                adam_step(forward, &grads, &mut adam)?;
                Some(loss)
            }
            Ok(_) | Err(Error::NonFinite(_)) => {
                skipped += 1;
                None
            }
            Err(e) => return Err(e),
        };
        baseline = Some(cfg.baseline_decay * b + (1.0 - cfg.baseline_decay) * mean);
        observe(&StepRecord { step, loss }, &policy)?;
    }
    if skipped as f64 > crate::gflownet::MAX_SKIPPED_FRACTION * cfg.steps as f64 {
        return Err(Error::TrainingFailed { skipped, steps: cfg.steps });
    }
    Ok(ReinforceOutcome { policy, mean_rewards, skipped })
}
