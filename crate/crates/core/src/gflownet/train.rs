use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{invalid, Error, Result};
use crate::gflownet::{sample_trajectories, tb_loss_batch, ConditionalPolicyNet};
use crate::neural::{adam_step, AdamState};
use crate::pareto::Preference;
use crate::scalarize::{sample_preference, DirichletParam, PreferenceEncoding, Scalarization};

/// Largest tolerated fraction of skipped steps.
pub const MAX_SKIPPED_FRACTION: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Reward exponent.
    pub beta: f64,
    /// Weight of uniform exploration mixed into the sampling policy.
    pub delta: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Learning rate of the partition head.
    pub lr_z: f64,
    /// Symmetric Dirichlet concentration of training preferences.
    pub alpha: f64,
    pub scalarization: Scalarization,
    /// Thermometer bins per preference component; 0 feeds raw weights.
    pub preference_bins: usize,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            delta: 0.0,
            steps: 1000,
            batch_size: 128,
            lr: 0.01,
            lr_z: 0.1,
            alpha: 1.5,
            scalarization: Scalarization::default(),
            preference_bins: 0,
            hidden: vec![64, 64],
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(invalid(format!("beta must be positive, got {}", self.beta)));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(invalid(format!("delta must lie in [0, 1), got {}", self.delta)));
        }
        if self.steps == 0 {
            return Err(invalid("steps must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be at least 1"));
        }
        for (name, lr) in [("lr", self.lr), ("lr_z", self.lr_z)] {
            if !(lr >= 0.0 && lr.is_finite()) {
                return Err(invalid(format!("{name} must be non-negative, got {lr}")));
            }
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        self.scalarization.validate()
    }
}

/// Log-reward of a terminal state, optionally conditioned on a preference.
pub trait LogReward<E: Environment + ?Sized>: Sync {
    /// Preference dimension, or `None` when the reward ignores preferences.
    fn preference_dim(&self, env: &E) -> Option<usize>;

    fn log_reward(&self, env: &E, terminal: &E::State, omega: &Preference) -> Result<f64>;
}

/// `β · ln scalarize(objectives(x), ω)`; the scalarization floor keeps it
/// finite.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarizedReward {
    pub scalarization: Scalarization,
    pub beta: f64,
}

impl<E: Environment + ?Sized> LogReward<E> for ScalarizedReward {
    fn preference_dim(&self, env: &E) -> Option<usize> {
        Some(env.num_objectives())
    }

    fn log_reward(&self, env: &E, terminal: &E::State, omega: &Preference) -> Result<f64> {
        let r = self.scalarization.scalarize(&env.objectives(terminal)?, omega)?;
        Ok(self.beta * r.ln())
    }
}

/// Outcome of one optimization step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    /// `None` when the step was skipped.
    pub loss: Option<f64>,
}

/// Trajectory-balance trainer for a preference-conditional policy.
pub struct PcTrainer<'a, E: Environment + ?Sized, R: LogReward<E>> {
    env: &'a E,
    reward: &'a R,
    cfg: TrainConfig,
    policy: ConditionalPolicyNet,
    dirichlet: Option<DirichletParam>,
    adam: AdamState,
    adam_z: AdamState,
    rng: ChaCha8Rng,
    steps: usize,
    skipped: usize,
}

impl<'a, E: Environment + ?Sized, R: LogReward<E>> PcTrainer<'a, E, R> {
    pub fn new(env: &'a E, reward: &'a R, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let (d, encoding) = match reward.preference_dim(env) {
            Some(d) => (d, PreferenceEncoding::from_bins(cfg.preference_bins)),
            None => (1, PreferenceEncoding::Empty),
        };
        let policy = ConditionalPolicyNet::new(env, d, encoding, &cfg.hidden, &mut rng)?;
        Self::with_policy(env, reward, cfg, policy, rng)
    }

    /// Continues training an existing policy with a given generator.
    pub fn with_policy(
        env: &'a E,
        reward: &'a R,
        cfg: TrainConfig,
        policy: ConditionalPolicyNet,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        policy.check_env(env)?;
        let dirichlet = match reward.preference_dim(env) {
            Some(d) => {
                if d != policy.preference_dim() {
                    return Err(Error::DimensionMismatch { expected: policy.preference_dim(), got: d });
                }
                Some(DirichletParam::new(cfg.alpha, d)?)
            }
            None => None,
        };
        Ok(Self {
            env,
            reward,
            adam: AdamState::new(cfg.lr),
            adam_z: AdamState::new(cfg.lr_z),
            cfg,
            policy,
            dirichlet,
            rng,
            steps: 0,
            skipped: 0,
        })
    }

    pub fn policy(&self) -> &ConditionalPolicyNet {
        &self.policy
    }

    pub fn into_policy(self) -> ConditionalPolicyNet {
        self.policy
    }

    pub fn steps_done(&self) -> usize {
        self.steps
    }

    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// One preference, one minibatch of mixed-policy rollouts, one Adam
    /// update on the mean loss. Non-finite losses or gradients skip the
    /// update.
    pub fn step(&mut self) -> Result<StepRecord> {
        let omega = match &self.dirichlet {
            Some(p) => sample_preference(p, &mut self.rng)?,
            None => Preference::new(vec![1.0])?,
        };
        let trajs = sample_trajectories(
            &self.policy,
            self.env,
            &omega,
            self.cfg.batch_size,
            self.cfg.delta,
            &mut self.rng,
        )?;
        let log_rewards: Vec<f64> = trajs
            .iter()
            .map(|t| self.reward.log_reward(self.env, t.terminal(), &omega))
            .collect::<Result<_>>()?;
        self.steps += 1;
        let step = self.steps;
        let batch = match tb_loss_batch(&self.policy, self.env, &trajs, &log_rewards) {
            Ok(b) if b.grads.is_finite() => b,
            Ok(_) | Err(Error::NonFinite(_)) => {
                self.skipped += 1;
                return Ok(StepRecord { step, loss: None });
            }
            Err(e) => return Err(e),
        };
        let (forward, log_z) = self.policy.nets_mut();
        adam_step(forward, &batch.grads.forward, &mut self.adam)?;
        adam_step(log_z, &batch.grads.log_z, &mut self.adam_z)?;
        Ok(StepRecord { step, loss: Some(batch.loss) })
    }

    /// Fails when more than [`MAX_SKIPPED_FRACTION`] of the steps so far were
    /// skipped.
    pub fn check_health(&self) -> Result<()> {
        if self.skipped as f64 > MAX_SKIPPED_FRACTION * self.steps as f64 {
            return Err(Error::TrainingFailed { skipped: self.skipped, steps: self.steps });
        }
        Ok(())
    }
}

/// Trained policy with its per-step losses (`None` for skipped steps).
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub policy: ConditionalPolicyNet,
    pub losses: Vec<Option<f64>>,
    pub skipped: usize,
}

/// Runs `cfg.steps` trainer steps, calling `observe` after each one.
pub fn train_with_reward<E, R, F>(env: &E, reward: &R, cfg: &TrainConfig, mut observe: F) -> Result<TrainOutcome>
where
    E: Environment + ?Sized,
    R: LogReward<E>,
    F: FnMut(&StepRecord, &ConditionalPolicyNet) -> Result<()>,
{
    let mut trainer = PcTrainer::new(env, reward, cfg.clone())?;
    let mut losses = Vec::with_capacity(cfg.steps);
    for _ in 0..cfg.steps {
        let rec = trainer.step()?;
        observe(&rec, trainer.policy())?;
        losses.push(rec.loss);
    }
    trainer.check_health()?;
    let skipped = trainer.skipped();
    Ok(TrainOutcome { policy: trainer.into_policy(), losses, skipped })
}

/// Trains a preference-conditional policy on the scalarized rewards of `env`.
pub fn train_mogfn_pc<E: Environment + ?Sized>(env: &E, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let reward = ScalarizedReward { scalarization: cfg.scalarization.clone(), beta: cfg.beta };
    train_with_reward(env, &reward, cfg, |_, _| Ok(()))
}
