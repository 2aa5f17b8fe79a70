use rand::Rng;

use crate::env::Environment;
use crate::error::{invalid, Result};
use crate::gflownet::ConditionalPolicyNet;
use crate::neural::log_softmax_masked;
use crate::pareto::{Candidate, Preference};

/// One rollout from an initial state to a terminal state.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<S> {
    /// `states[t + 1] = step(states[t], actions[t])`.
    pub states: Vec<S>,
    pub actions: Vec<usize>,
    pub preference: Preference,
    /// `Σ log P_F` of the taken actions under the unmixed policy.
    pub log_pf: f64,
    pub log_pb: f64,
}

impl<S> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn initial(&self) -> &S {
        &self.states[0]
    }

    pub fn terminal(&self) -> &S {
        &self.states[self.states.len() - 1]
    }

    /// `(state, action)` pairs in order.
    pub fn steps(&self) -> impl Iterator<Item = (&S, usize)> {
        self.states.iter().zip(self.actions.iter().copied())
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&delta) {
        return Err(invalid(format!("exploration mix delta must lie in [0, 1), got {delta}")));
    }
    Ok(())
}

/// Draws an index from log-probabilities mixed with a uniform distribution
/// over the valid entries.
fn draw<R: Rng + ?Sized>(log_probs: &[f64], mask: &[bool], delta: f64, rng: &mut R) -> usize {
    let valid = mask.iter().filter(|&&m| m).count() as f64;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (a, (&lp, &m)) in log_probs.iter().zip(mask).enumerate() {
        if !m {
            continue;
        }
        acc += (1.0 - delta) * lp.exp() + delta / valid;
        last = a;
        if u < acc {
            return a;
        }
    }
    last
}

/// Rolls out `n` trajectories in lockstep under one preference. Each action
/// is drawn from `(1 − δ) P_F + δ Uniform(valid actions)`.
pub fn sample_trajectories<E, R>(
    policy: &ConditionalPolicyNet,
    env: &E,
    omega: &Preference,
    n: usize,
    delta: f64,
    rng: &mut R,
) -> Result<Vec<Trajectory<E::State>>>
where
    E: Environment + ?Sized,
    R: Rng,
{
    check_delta(delta)?;
    policy.check_env(env)?;
    let pref_enc = policy.encode_preference(omega)?;
    let mut trajs: Vec<Trajectory<E::State>> = (0..n)
        .map(|_| Trajectory {
            states: vec![env.sample_initial_state(rng)],
            actions: Vec::with_capacity(env.max_trajectory_len()),
            preference: omega.clone(),
            log_pf: 0.0,
            log_pb: 0.0,
        })
        .collect();
    loop {
        let active: Vec<usize> =
            (0..n).filter(|&i| !env.is_terminal(trajs[i].terminal())).collect();
        if active.is_empty() {
            break;
        }
        let states: Vec<&E::State> = active.iter().map(|&i| trajs[i].terminal()).collect();
        let logits = policy.batch_logits(env, &states, &pref_enc)?;
        let mut moves = Vec::with_capacity(active.len());
        for (row, &i) in logits.rows().into_iter().zip(&active) {
            let state = trajs[i].terminal();
            let mask = env.action_mask(state);
            let logits: Vec<f64> = row.to_vec();
            let lp = log_softmax_masked(&logits, &mask)?;
            let a = draw(&lp, &mask, delta, rng);
            moves.push((i, a, lp[a]));
        }
        for (i, a, lp) in moves {
            let t = &mut trajs[i];
            let next = env.step(t.terminal(), a)?;
            t.log_pb += env.log_backward(&next);
            t.log_pf += lp;
            t.actions.push(a);
            t.states.push(next);
        }
    }
    Ok(trajs)
}

pub fn sample_trajectory<E, R>(
    policy: &ConditionalPolicyNet,
    env: &E,
    omega: &Preference,
    delta: f64,
    rng: &mut R,
) -> Result<Trajectory<E::State>>
where
    E: Environment + ?Sized,
    R: Rng,
{
    Ok(sample_trajectories(policy, env, omega, 1, delta, rng)?.remove(0))
}

/// `n` independent on-policy rollouts with their objectives.
pub fn sample_candidates<E, R>(
    policy: &ConditionalPolicyNet,
    env: &E,
    omega: &Preference,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Candidate>>
where
    E: Environment + ?Sized,
    R: Rng,
{
    if n == 0 {
        return Err(invalid("at least one candidate must be requested"));
    }
    sample_trajectories(policy, env, omega, n, 0.0, rng)?
        .iter()
        .map(|t| {
            let x = t.terminal();
            Ok(Candidate { payload: env.payload(x), objectives: env.objectives(x)? })
        })
        .collect()
}
