use ndarray::Array2;

use crate::env::Environment;
use crate::error::{check_dim, invalid, Error, Result};
use crate::gflownet::{ConditionalPolicyNet, PolicyGrads, Trajectory};
use crate::neural::{log_softmax_masked, ForwardCache};

/// Every transition of a batch, laid out as network input rows.
pub(crate) struct TransitionRows {
    pub logits: Array2<f64>,
    pub cache: ForwardCache,
    pub masks: Vec<Vec<bool>>,
    pub actions: Vec<usize>,
    /// Index of the trajectory each row belongs to.
    pub owner: Vec<usize>,
    /// Masked log-probabilities of every row.
    pub log_probs: Vec<Vec<f64>>,
}

pub(crate) fn transition_rows<E: Environment + ?Sized>(
    policy: &ConditionalPolicyNet,
    env: &E,
    trajs: &[Trajectory<E::State>],
) -> Result<TransitionRows> {
    let prefs: Vec<Vec<f64>> =
        trajs.iter().map(|t| policy.encode_preference(&t.preference)).collect::<Result<_>>()?;
    let mut inputs = Vec::new();
    let mut masks = Vec::new();
    let mut actions = Vec::new();
    let mut owner = Vec::new();
    for (i, t) in trajs.iter().enumerate() {
        if t.states.len() != t.actions.len() + 1 {
            return Err(invalid("trajectory needs one more state than actions"));
        }
        if !env.is_terminal(t.terminal()) {
            return Err(invalid("trajectory does not end in a terminal state"));
        }
        for (s, a) in t.steps() {
            inputs.push((s, prefs[i].as_slice()));
            masks.push(env.action_mask(s));
            actions.push(a);
            owner.push(i);
        }
    }
    let x = policy.input_rows(env, inputs.into_iter())?;
    let (logits, cache) = policy.forward_net().forward_cached(x)?;
    let mut log_probs = Vec::with_capacity(actions.len());
    for (row, mask) in logits.rows().into_iter().zip(&masks) {
        log_probs.push(log_softmax_masked(&row.to_vec(), mask)?);
    }
    for (lp, &a) in log_probs.iter().zip(&actions) {
        if !lp[a].is_finite() {
            return Err(Error::InvalidAction { action: a, reason: "masked in the recorded state".into() });
        }
    }
    Ok(TransitionRows { logits, cache, masks, actions, owner, log_probs })
}

/// `log Z` for every trajectory, with the cache of the partition head.
pub(crate) fn log_z_rows<E: Environment + ?Sized>(
    policy: &ConditionalPolicyNet,
    env: &E,
    trajs: &[Trajectory<E::State>],
) -> Result<(Vec<f64>, ForwardCache)> {
    let width = policy.log_z_net().input_dim();
    let mut x = Array2::zeros((trajs.len(), width));
    for (mut row, t) in x.rows_mut().into_iter().zip(trajs) {
        let pref = policy.encode_preference(&t.preference)?;
        let row = row.as_slice_mut().ok_or_else(|| invalid("non-contiguous input row"))?;
        row[..pref.len()].copy_from_slice(&pref);
        env.encode_context(t.initial(), &mut row[pref.len()..]);
    }
    let (out, cache) = policy.log_z_net().forward_cached(x)?;
    Ok((out.column(0).to_vec(), cache))
}

/// Mean trajectory-balance loss of a batch and its gradient.
#[derive(Clone, Debug)]
pub struct BatchLoss {
    pub loss: f64,
    /// `(log Z + Σ log P_F − log R − Σ log P_B)` per trajectory.
    pub residuals: Vec<f64>,
    pub grads: PolicyGrads,
}

/// Mean of `(log Z(ω) + Σ log P_F − log R − Σ log P_B)²` over `trajs` and its
/// gradient with respect to both heads. `log P_F` and `log P_B` are
/// recomputed from the current parameters and the environment.
pub fn tb_loss_batch<E: Environment + ?Sized>(
    policy: &ConditionalPolicyNet,
    env: &E,
    trajs: &[Trajectory<E::State>],
    log_rewards: &[f64],
) -> Result<BatchLoss> {
    check_dim(trajs.len(), log_rewards.len())?;
    if trajs.is_empty() {
        return Err(invalid("empty trajectory batch"));
    }
    if let Some(r) = log_rewards.iter().find(|r| !r.is_finite()) {
        return Err(Error::NonFinite(format!("log reward {r}")));
    }
    let rows = transition_rows(policy, env, trajs)?;
    let (log_z, z_cache) = log_z_rows(policy, env, trajs)?;
    let mut sum_pf = vec![0.0; trajs.len()];
    for ((lp, &a), &i) in rows.log_probs.iter().zip(&rows.actions).zip(&rows.owner) {
        sum_pf[i] += lp[a];
    }
    let residuals: Vec<f64> = trajs
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let log_pb: f64 = t.states[1..].iter().map(|s| env.log_backward(s)).sum();
            log_z[i] + sum_pf[i] - log_rewards[i] - log_pb
        })
        .collect();
    let n = trajs.len() as f64;
    let loss = residuals.iter().map(|d| d * d).sum::<f64>() / n;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("trajectory-balance loss {loss}")));
    }

    // d log p(a) / d logits = onehot(a) − p over the valid actions.
    let mut up = Array2::zeros(rows.logits.raw_dim());
    for (r, mut row) in up.rows_mut().into_iter().enumerate() {
        let scale = 2.0 * residuals[rows.owner[r]] / n;
        for (j, g) in row.iter_mut().enumerate() {
            if rows.masks[r][j] {
                let p = rows.log_probs[r][j].exp();
                *g = scale * (f64::from(u8::from(j == rows.actions[r])) - p);
            }
        }
    }
    let (forward, _) = policy.forward_net().backward_batch(&rows.cache, up.view(), false)?;
    let z_up = Array2::from_shape_fn((trajs.len(), 1), |(i, _)| 2.0 * residuals[i] / n);
    let (log_z_grads, _) = policy.log_z_net().backward_batch(&z_cache, z_up.view(), false)?;
    Ok(BatchLoss { loss, residuals, grads: PolicyGrads { forward, log_z: log_z_grads } })
}

/// Trajectory-balance loss of one trajectory for a positive reward.
pub fn tb_loss<E: Environment + ?Sized>(
    policy: &ConditionalPolicyNet,
    env: &E,
    traj: &Trajectory<E::State>,
    reward: f64,
) -> Result<f64> {
    if !(reward > 0.0 && reward.is_finite()) {
        return Err(invalid(format!("reward must be positive and finite, got {reward}")));
    }
    Ok(tb_loss_batch(policy, env, std::slice::from_ref(traj), &[reward.ln()])?.loss)
}

/// `(log Z + Σ log P_F − log R − Σ log P_B)²` from its parts.
pub fn tb_objective(log_z: f64, log_pf: f64, log_reward: f64, log_pb: f64) -> f64 {
    let d = log_z + log_pf - log_reward - log_pb;
    d * d
}
