use std::collections::{BTreeMap, HashMap};

use crate::env::{enumerate_levels, enumerate_terminals, Environment};
use crate::error::{invalid, Result};
use crate::gflownet::{ConditionalPolicyNet, LogReward};
use crate::neural::log_softmax_masked;
use crate::pareto::Preference;

/// Terminal distribution of the unmixed policy from the environment's
/// initial state, propagated level by level through the state DAG.
pub fn exact_policy_distribution<E: Environment + ?Sized>(
    policy: &ConditionalPolicyNet,
    env: &E,
    omega: &Preference,
) -> Result<BTreeMap<E::State, f64>> {
    policy.check_env(env)?;
    let pref = policy.encode_preference(omega)?;
    let levels = enumerate_levels(env)?;
    let mut flow: HashMap<E::State, f64> = HashMap::new();
    flow.insert(env.initial_state(), 1.0);
    let mut out = BTreeMap::new();
    for level in &levels {
        let mut inner: Vec<(&E::State, f64)> = Vec::new();
        for s in level {
            let Some(&f) = flow.get(s) else { continue };
            if env.is_terminal(s) {
                out.insert(s.clone(), f);
            } else {
                inner.push((s, f));
            }
        }
        if inner.is_empty() {
            continue;
        }
        let states: Vec<&E::State> = inner.iter().map(|(s, _)| *s).collect();
        let logits = policy.batch_logits(env, &states, &pref)?;
        for ((s, f), row) in inner.into_iter().zip(logits.rows()) {
            let mask = env.action_mask(s);
            let lp = log_softmax_masked(&row.to_vec(), &mask)?;
            for (a, &ok) in mask.iter().enumerate() {
                if ok {
                    *flow.entry(env.step(s, a)?).or_insert(0.0) += f * lp[a].exp();
                }
            }
        }
    }
    Ok(out)
}

/// `R(x|ω)^β / Σ_x' R(x'|ω)^β` over every terminal, from log-rewards.
pub fn target_distribution<E: Environment + ?Sized, R: LogReward<E>>(
    env: &E,
    reward: &R,
    omega: &Preference,
) -> Result<BTreeMap<E::State, f64>> {
    let terminals = enumerate_terminals(env)?;
    if terminals.is_empty() {
        return Err(invalid("environment has no terminal states"));
    }
    let logs: Vec<f64> =
        terminals.iter().map(|x| reward.log_reward(env, x, omega)).collect::<Result<_>>()?;
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logs.iter().map(|l| (l - max).exp()).sum();
    Ok(terminals.into_iter().zip(logs).map(|(x, l)| (x, (l - max).exp() / z)).collect())
}

/// Mean absolute difference between two distributions, averaged uniformly
/// over the union of their supports.
pub fn l1_gap<S: Ord>(p: &BTreeMap<S, f64>, q: &BTreeMap<S, f64>) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for (x, pv) in p {
        total += (pv - q.get(x).copied().unwrap_or(0.0)).abs();
        count += 1;
    }
    for (x, qv) in q {
        if !p.contains_key(x) {
            total += qv.abs();
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

/// `mean_x |π(x|ω) − R(x|ω)^β / Z_β(ω)|`, uniform over terminals.
pub fn l1_distribution_gap<E: Environment + ?Sized, R: LogReward<E>>(
    policy: &ConditionalPolicyNet,
    env: &E,
    reward: &R,
    omega: &Preference,
) -> Result<f64> {
    let target = target_distribution(env, reward, omega)?;
    let learned = exact_policy_distribution(policy, env, omega)?;
    Ok(l1_gap(&learned, &target))
}
