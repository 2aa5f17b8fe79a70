use std::collections::HashSet;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use mogfn::baseline::train_moreinforce_observed;
use mogfn::env::{enumerate_terminals, Environment};
use mogfn::gflownet::{
    l1_distribution_gap, sample_candidates, train_with_reward, ConditionalPolicyNet, ScalarizedReward, StepRecord,
};
use mogfn::metrics::{
    gd_plus, hypervolume, r2_indicator, topk_diversity, topk_reward, uniform_reference_vectors, CandidateSet, HvRef,
    ReferenceVectorSet, DIVERSITY_DEFINITION,
};
use mogfn::mobo::{run_al_loop_observed, RoundRecord};
use mogfn::{nondominated_filter, Candidate, Front, Payload, Scalarization};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Method, Task};
use crate::io::{blob_hash, write_atomic, write_json, write_jsonl};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub hv: f64,
    pub r2: f64,
    pub gd_plus: Option<f64>,
    pub topk_reward: Option<f64>,
    pub topk_diversity: Option<f64>,
}

impl MetricsRow {
    pub const HEADER: [&'static str; 6] = ["hv", "r2", "gd_plus", "topk_reward", "topk_diversity", "diversity_definition"];

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::HEADER)?;
        w.write_record([
            self.hv.to_string(),
            self.r2.to_string(),
            opt(self.gd_plus),
            opt(self.topk_reward),
            opt(self.topk_diversity),
            DIVERSITY_DEFINITION.to_string(),
        ])?;
        Ok(w.into_inner()?)
    }

    pub fn from_csv(bytes: &[u8]) -> Result<Self> {
        let mut r = csv::Reader::from_reader(bytes);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != Self::HEADER {
            bail!("unexpected metrics header {headers:?}");
        }
        let rec = r.records().next().context("metrics file has no rows")??;
        let opt = |i: usize| -> Result<Option<f64>> {
            match &rec[i] {
                "" => Ok(None),
                s => Ok(Some(s.parse().with_context(|| format!("bad {} value `{s}`", Self::HEADER[i]))?)),
            }
        };
        Ok(Self {
            hv: opt(0)?.context("missing hv")?,
            r2: opt(1)?.context("missing r2")?,
            gd_plus: opt(2)?,
            topk_reward: opt(3)?,
            topk_diversity: opt(4)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub task: Task,
    pub method: Method,
    pub seed: u64,
    pub config_hash: String,
    pub front_hash: String,
    pub wall_time_s: f64,
    pub metrics: MetricsRow,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l1_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l1_gap_by_preference: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_hv: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_calls: Option<usize>,
}

#[derive(Serialize)]
struct LogRow {
    step: usize,
    loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hv: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    r2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    topk_reward: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    topk_diversity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    l1_gap: Option<f64>,
}

#[derive(Serialize)]
struct RoundRow {
    round: usize,
    oracle_calls: usize,
    hypervolume: f64,
    relative_hv: f64,
    beta: f64,
    random_fills: usize,
    front: String,
}

/// Largest simplex lattice with at most `target` points (at least one level).
pub fn test_preferences(d: usize, target: usize) -> Result<ReferenceVectorSet> {
    let count = |r: usize| -> usize {
        // C(r + d - 1, d - 1)
        (1..d).fold(1usize, |acc, i| acc * (r + i) / i)
    };
    let mut r = 1;
    while count(r + 1) <= target {
        r += 1;
    }
    Ok(uniform_reference_vectors(d, r)?)
}

/// Keeps the first occurrence of each payload, then the non-dominated subset.
pub fn candidate_front(candidates: &[Candidate]) -> Result<Front> {
    let mut seen = HashSet::new();
    let unique: Vec<Candidate> =
        candidates.iter().filter(|c| seen.insert(c.payload.to_string())).cloned().collect();
    if unique.is_empty() {
        return Ok(Front::default());
    }
    Ok(Front::from_candidates(&unique)?.nondominated()?)
}

pub fn front_csv(front: &Front) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    front.write_csv(&mut bytes)?;
    Ok(bytes)
}

pub fn candidates_csv(sets: &[CandidateSet]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let (dp, d) = sets
        .iter()
        .find_map(|s| s.candidates.first().map(|c| (s.preference.dim(), c.objectives.dim())))
        .unwrap_or((0, 0));
    let header: Vec<String> = (0..dp)
        .map(|i| format!("pref_{i}"))
        .chain(std::iter::once("payload".to_string()))
        .chain((0..d).map(|i| format!("obj_{i}")))
        .collect();
    w.write_record(&header)?;
    for s in sets {
        for c in &s.candidates {
            let row: Vec<String> = s
                .preference
                .weights()
                .iter()
                .map(f64::to_string)
                .chain(std::iter::once(c.payload.to_string()))
                .chain(c.objectives.values().iter().map(f64::to_string))
                .collect();
            w.write_record(&row)?;
        }
    }
    Ok(w.into_inner()?)
}

/// Reads grid cells written as `(i,j)`; anything else is a sequence.
pub fn parse_payload(text: &str) -> Payload {
    let cell = text.strip_prefix('(').and_then(|t| t.strip_suffix(')')).and_then(|inner| {
        inner.split(',').map(|p| p.trim().parse::<usize>().ok()).collect::<Option<Vec<_>>>()
    });
    match cell {
        Some(c) if !c.is_empty() => Payload::Cell(c),
        _ => Payload::Sequence(text.to_string()),
    }
}

/// Groups consecutive rows with equal preference columns into sets.
pub fn read_candidates_csv(bytes: &[u8]) -> Result<Vec<CandidateSet>> {
    let mut r = csv::Reader::from_reader(bytes);
    let headers = r.headers()?.clone();
    let pref_cols: Vec<usize> = (0..headers.len()).filter(|&i| headers[i].starts_with("pref_")).collect();
    let obj_cols: Vec<usize> = (0..headers.len()).filter(|&i| headers[i].starts_with("obj_")).collect();
    let payload_col = headers.iter().position(|h| h == "payload").context("candidates need a payload column")?;
    if pref_cols.is_empty() || obj_cols.is_empty() {
        bail!("candidates need pref_* and obj_* columns");
    }
    let parse = |s: &str| s.parse::<f64>().with_context(|| format!("bad number `{s}`"));
    let mut sets: Vec<CandidateSet> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let w = pref_cols.iter().map(|&i| parse(&rec[i])).collect::<Result<Vec<_>>>()?;
        let y = obj_cols.iter().map(|&i| parse(&rec[i])).collect::<Result<Vec<_>>>()?;
        let candidate =
            Candidate { payload: parse_payload(&rec[payload_col]), objectives: mogfn::ObjectiveVector::new(y)? };
        match sets.last_mut() {
            Some(s) if s.preference.weights() == w.as_slice() => s.candidates.push(candidate),
            _ => sets.push(CandidateSet { preference: mogfn::Preference::new(w)?, candidates: vec![candidate] }),
        }
    }
    Ok(sets)
}

struct Evaluation {
    sets: Vec<CandidateSet>,
    front: Front,
    metrics: MetricsRow,
}

struct EvalContext<'a> {
    prefs: &'a ReferenceVectorSet,
    scalarization: &'a Scalarization,
    reference: HvRef,
    truth: Option<&'a Front>,
    samples: usize,
    k: usize,
    seed: u64,
}

fn indicators(
    front: &Front,
    sets: &[CandidateSet],
    ctx: &EvalContext<'_>,
) -> Result<MetricsRow> {
    let enough = sets.iter().all(|s| s.candidates.len() >= ctx.k);
    Ok(MetricsRow {
        hv: hypervolume(front, &ctx.reference)?,
        r2: r2_indicator(front, ctx.prefs)?,
        gd_plus: ctx.truth.map(|t| gd_plus(front, t)).transpose()?,
        topk_reward: if enough { Some(topk_reward(sets, ctx.scalarization, ctx.k)?) } else { None },
        topk_diversity: if enough { Some(topk_diversity(sets, ctx.scalarization, ctx.k)?) } else { None },
    })
}

/// Samples every test preference with a generator that depends only on the
/// seed, so interim and final evaluations are comparable.
fn evaluate<E: Environment + ?Sized>(
    policy: &ConditionalPolicyNet,
    env: &E,
    ctx: &EvalContext<'_>,
) -> Result<Evaluation> {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    rng.set_stream(1);
    let sets = ctx
        .prefs
        .vectors
        .iter()
        .map(|w| {
            Ok(CandidateSet {
                preference: w.clone(),
                candidates: sample_candidates(policy, env, w, ctx.samples, &mut rng)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let all: Vec<Candidate> = sets.iter().flat_map(|s| s.candidates.iter().cloned()).collect();
    let front = candidate_front(&all)?;
    let metrics = indicators(&front, &sets, ctx)?;
    Ok(Evaluation { sets, front, metrics })
}

/// Runs the configured pipeline and writes every artifact under `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<Summary> {
    cfg.validate()?;
    let started = Instant::now();
    let mut stored = cfg.clone();
    stored.out_dir = None;
    write_json(&out.join("config.json"), &stored)?;
    let mut summary = match cfg.task {
        Task::Hypergrid => {
            let env = cfg.hypergrid.as_ref().expect("validated").build()?;
            let terminals = enumerate_terminals(&env)?;
            let points = terminals.iter().map(|s| env.objectives(s)).collect::<mogfn::Result<Vec<_>>>()?;
            let truth = nondominated_filter(&points)?;
            write_atomic(&out.join("truth_front.csv"), &front_csv(&truth)?)?;
            run_policy(cfg, &env, Some(&truth), out)?
        }
        Task::Ngrams => {
            let env = cfg.ngrams.as_ref().expect("validated").build()?;
            run_policy(cfg, &env, None, out)?
        }
        Task::Al => run_al(cfg, out)?,
    };
    summary.wall_time_s = started.elapsed().as_secs_f64();
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

fn run_policy<E: Environment>(cfg: &ExperimentConfig, env: &E, truth: Option<&Front>, out: &Path) -> Result<Summary> {
    let d = env.num_objectives();
    let prefs = test_preferences(d, cfg.eval.preferences)?;
    let weights: Vec<&[f64]> = prefs.vectors.iter().map(|w| w.weights()).collect();
    write_json(&out.join("test_preferences.json"), &weights)?;
    let scalarization = match (&cfg.train, &cfg.reinforce) {
        (Some(t), _) => t.scalarization.clone(),
        (_, Some(r)) => r.scalarization.clone(),
        _ => unreachable!("validated"),
    };
    let ctx = EvalContext {
        prefs: &prefs,
        scalarization: &scalarization,
        reference: HvRef::constant(d, cfg.eval.hv_ref)?,
        truth,
        samples: cfg.eval.samples,
        k: cfg.eval.k,
        seed: cfg.seed,
    };
    let reward = cfg.train.as_ref().map(|t| ScalarizedReward { scalarization: t.scalarization.clone(), beta: t.beta });
    let exact_gaps = |policy: &ConditionalPolicyNet| -> Result<Vec<f64>> {
        let reward = reward.as_ref().context("exact check needs trajectory-balance training")?;
        prefs.vectors.iter().map(|w| Ok(l1_distribution_gap(policy, env, reward, w)?)).collect()
    };
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;

    let mut log = Vec::new();
    let mut observe = |rec: &StepRecord, policy: &ConditionalPolicyNet| -> mogfn::Result<()> {
        let mut row = LogRow {
            step: rec.step,
            loss: rec.loss,
            hv: None,
            r2: None,
            topk_reward: None,
            topk_diversity: None,
            l1_gap: None,
        };
        if cfg.eval.interval > 0 && rec.step % cfg.eval.interval == 0 {
            let e = evaluate(policy, env, &ctx).map_err(to_core)?;
            row.hv = Some(e.metrics.hv);
            row.r2 = Some(e.metrics.r2);
            row.topk_reward = e.metrics.topk_reward;
            row.topk_diversity = e.metrics.topk_diversity;
            if cfg.eval.exact_check {
                row.l1_gap = Some(mean(&exact_gaps(policy).map_err(to_core)?));
            }
        }
        log.push(row);
        Ok(())
    };
    let (policy, skipped) = match cfg.method {
        Method::MogfnPc => {
            let train = cfg.train.as_ref().expect("validated");
            let o = train_with_reward(env, reward.as_ref().expect("validated"), train, &mut observe)?;
            (o.policy, o.skipped)
        }
        Method::Moreinforce => {
            let o = train_moreinforce_observed(env, cfg.reinforce.as_ref().expect("validated"), &mut observe)?;
            (o.policy, o.skipped)
        }
        m => bail!("method {m:?} does not train a policy"),
    };
    write_jsonl(&out.join("train_log.jsonl"), &log)?;
    policy.save_json(&out.join("checkpoint.json"))?;

    let e = evaluate(&policy, env, &ctx)?;
    write_atomic(&out.join("candidates.csv"), &candidates_csv(&e.sets)?)?;
    let front = front_csv(&e.front)?;
    write_atomic(&out.join("front.csv"), &front)?;
    write_atomic(&out.join("metrics.csv"), &e.metrics.to_csv()?)?;
    let gaps = if cfg.eval.exact_check { Some(exact_gaps(&policy)?) } else { None };
    Ok(Summary {
        task: cfg.task,
        method: cfg.method,
        seed: cfg.seed,
        config_hash: cfg.hash(),
        front_hash: blob_hash(&front),
        wall_time_s: 0.0,
        metrics: e.metrics,
        skipped_steps: Some(skipped),
        l1_gap: gaps.as_deref().map(mean),
        l1_gap_by_preference: gaps,
        relative_hv: None,
        oracle_calls: None,
    })
}

fn to_core(e: anyhow::Error) -> mogfn::Error {
    match e.downcast::<mogfn::Error>() {
        Ok(e) => e,
        Err(e) => mogfn::Error::InvalidArgument(format!("{e:#}")),
    }
}

fn run_al(cfg: &ExperimentConfig, out: &Path) -> Result<Summary> {
    let al = cfg.al.as_ref().expect("validated");
    let oracle = cfg.ngrams.as_ref().expect("validated").build()?;
    let d = oracle.patterns().len();
    let mut rows = Vec::new();
    let outcome = run_al_loop_observed(&oracle, al, |r: &RoundRecord| {
        let rel = format!("fronts/round_{:03}.csv", r.round);
        let bytes = front_csv(&r.front).map_err(to_core)?;
        write_atomic(&out.join(&rel), &bytes).map_err(to_core)?;
        rows.push(RoundRow {
            round: r.round,
            oracle_calls: r.oracle_calls,
            hypervolume: r.hypervolume,
            relative_hv: r.relative_hv,
            beta: r.beta,
            random_fills: r.random_fills,
            front: rel,
        });
        Ok(())
    })?;
    write_jsonl(&out.join("rounds.jsonl"), &rows)?;

    let entries = &outcome.dataset.entries;
    let all: Vec<Candidate> = entries
        .iter()
        .map(|(s, y)| Candidate { payload: Payload::Sequence(s.clone()), objectives: y.clone() })
        .collect();
    let uniform = mogfn::Preference::uniform(d)?;
    write_atomic(
        &out.join("candidates.csv"),
        &candidates_csv(&[CandidateSet { preference: uniform, candidates: all.clone() }])?,
    )?;
    let last = outcome.rounds.last().expect("round 0 is always recorded");
    let front = front_csv(&last.front)?;
    write_atomic(&out.join("front.csv"), &front)?;

    // Top-k statistics describe the final evaluated batch.
    let batch_start = if last.round == 0 { 0 } else { all.len() - al.batch_size };
    let prefs = test_preferences(d, cfg.eval.preferences)?;
    let batch = &all[batch_start..];
    let sets: Vec<CandidateSet> = prefs
        .vectors
        .iter()
        .map(|w| CandidateSet { preference: w.clone(), candidates: batch.to_vec() })
        .collect();
    let scalarization = Scalarization::default();
    let ctx = EvalContext {
        prefs: &prefs,
        scalarization: &scalarization,
        reference: HvRef::constant(d, al.hv_ref)?,
        truth: None,
        samples: 0,
        k: cfg.eval.k,
        seed: cfg.seed,
    };
    let metrics = indicators(&last.front, &sets, &ctx)?;
    write_atomic(&out.join("metrics.csv"), &metrics.to_csv()?)?;
    Ok(Summary {
        task: cfg.task,
        method: cfg.method,
        seed: cfg.seed,
        config_hash: cfg.hash(),
        front_hash: blob_hash(&front),
        wall_time_s: 0.0,
        metrics,
        skipped_steps: None,
        l1_gap: None,
        l1_gap_by_preference: None,
        relative_hv: Some(outcome.rounds.iter().map(|r| r.relative_hv).collect()),
        oracle_calls: Some(last.oracle_calls),
    })
}
