//! Experiment configuration: one JSON object per run.
//!
//! Sections a task does not name are filled from per-task defaults before
//! deserialization, so a minimal file needs only `task` and `method`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mogfn::baseline::ReinforceConfig;
use mogfn::env::testfns::TestFunction;
use mogfn::env::{HyperGrid, NGrams, AMINO_ACIDS};
use mogfn::gflownet::TrainConfig;
use mogfn::mobo::{ALConfig, ProposerKind};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Hypergrid,
    Ngrams,
    Al,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MogfnPc,
    Moreinforce,
    MogfnAl,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperGridParams {
    pub side: usize,
    pub functions: Vec<TestFunction>,
}

impl Default for HyperGridParams {
    fn default() -> Self {
        Self { side: 8, functions: vec![TestFunction::Branin, TestFunction::Currin] }
    }
}

impl HyperGridParams {
    pub fn build(&self) -> Result<HyperGrid> {
        HyperGrid::new(self.side, self.functions.clone()).context("invalid `hypergrid` section")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NGramsParams {
    pub alphabet: String,
    pub max_len: usize,
    pub patterns: Vec<String>,
}

impl Default for NGramsParams {
    fn default() -> Self {
        Self {
            alphabet: AMINO_ACIDS.to_string(),
            max_len: 36,
            patterns: ["AC", "CV", "VA"].map(String::from).to_vec(),
        }
    }
}

impl NGramsParams {
    pub fn build(&self) -> Result<NGrams> {
        NGrams::new(&self.alphabet, self.max_len, self.patterns.clone()).context("invalid `ngrams` section")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// Target size of the test-preference lattice.
    pub preferences: usize,
    /// Candidates sampled per test preference.
    pub samples: usize,
    pub k: usize,
    /// Steps between logged metric rows; 0 logs only the final evaluation.
    pub interval: usize,
    /// Hypervolume reference coordinate, shared by every objective.
    pub hv_ref: f64,
    pub exact_check: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { preferences: 16, samples: 128, k: 10, interval: 0, hv_ref: 0.0, exact_check: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    pub method: Method,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypergrid: Option<HyperGridParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ngrams: Option<NGramsParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reinforce: Option<ReinforceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub al: Option<ALConfig>,
    pub eval: EvalConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

fn hypergrid_train() -> TrainConfig {
    TrainConfig {
        steps: 20_000,
        batch_size: 128,
        lr: 0.005,
        lr_z: 0.01,
        alpha: 1.5,
        delta: 0.05,
        ..TrainConfig::default()
    }
}

fn ngrams_train() -> TrainConfig {
    TrainConfig {
        beta: 48.0,
        delta: 0.0,
        steps: 8000,
        batch_size: 32,
        lr: 0.003,
        lr_z: 0.1,
        alpha: 1.0,
        ..TrainConfig::default()
    }
}

fn reinforce_defaults(task: Task) -> ReinforceConfig {
    match task {
        Task::Hypergrid => ReinforceConfig { steps: 20_000, batch_size: 128, alpha: 1.5, ..Default::default() },
        _ => ReinforceConfig { steps: 8000, batch_size: 32, alpha: 1.0, ..Default::default() },
    }
}

impl ExperimentConfig {
    /// Fully populated defaults for a task/method pair.
    pub fn defaults(task: Task, method: Method) -> Result<Self> {
        let mut cfg = Self {
            task,
            method,
            seed: 0,
            hypergrid: None,
            ngrams: None,
            train: None,
            reinforce: None,
            al: None,
            eval: EvalConfig::default(),
            out_dir: None,
        };
        match (task, method) {
            (Task::Hypergrid, Method::MogfnPc) => {
                cfg.hypergrid = Some(HyperGridParams::default());
                cfg.train = Some(hypergrid_train());
            }
            (Task::Hypergrid, Method::Moreinforce) => {
                cfg.hypergrid = Some(HyperGridParams::default());
                cfg.reinforce = Some(reinforce_defaults(task));
            }
            (Task::Ngrams, Method::MogfnPc) => {
                cfg.ngrams = Some(NGramsParams::default());
                cfg.train = Some(ngrams_train());
            }
            (Task::Ngrams, Method::Moreinforce) => {
                cfg.ngrams = Some(NGramsParams::default());
                cfg.reinforce = Some(reinforce_defaults(task));
            }
            (Task::Al, Method::MogfnAl | Method::Random) => {
                let al = ALConfig {
                    proposer_kind: if method == Method::Random { ProposerKind::Random } else { ProposerKind::Gflownet },
                    ..ALConfig::default()
                };
                cfg.ngrams = Some(NGramsParams { max_len: al.seq_len, ..NGramsParams::default() });
                cfg.al = Some(al);
            }
            (task, method) => bail!("method {method:?} does not apply to task {task:?}"),
        }
        Ok(cfg)
    }

    /// Replaces the run seed everywhere it is consumed.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        if let Some(t) = &mut self.train {
            t.seed = seed;
        }
        if let Some(r) = &mut self.reinforce {
            r.seed = seed;
        }
        if let Some(a) = &mut self.al {
            a.seed = seed;
        }
    }

    /// Checks every parameter, including environment construction.
    pub fn validate(&self) -> Result<()> {
        let expected = Self::defaults(self.task, self.method)?;
        let sections = [
            ("hypergrid", self.hypergrid.is_some(), expected.hypergrid.is_some()),
            ("ngrams", self.ngrams.is_some(), expected.ngrams.is_some()),
            ("train", self.train.is_some(), expected.train.is_some()),
            ("reinforce", self.reinforce.is_some(), expected.reinforce.is_some()),
            ("al", self.al.is_some(), expected.al.is_some()),
        ];
        for (name, present, wanted) in sections {
            if present && !wanted {
                bail!("section `{name}` does not apply to task {:?} with method {:?}", self.task, self.method);
            }
            if wanted && !present {
                bail!("missing section `{name}`");
            }
        }
        if let Some(h) = &self.hypergrid {
            h.build()?;
        }
        if let Some(n) = &self.ngrams {
            n.build()?;
        }
        if let Some(t) = &self.train {
            t.validate().context("invalid `train` section")?;
        }
        if let Some(r) = &self.reinforce {
            r.validate().context("invalid `reinforce` section")?;
        }
        if let Some(a) = &self.al {
            a.validate().context("invalid `al` section")?;
            let kind = expected.al.as_ref().expect("checked above").proposer_kind;
            if a.proposer_kind != kind {
                bail!("`al.proposer_kind` {:?} contradicts method {:?}", a.proposer_kind, self.method);
            }
            let n = self.ngrams.as_ref().expect("checked above");
            if n.max_len != a.seq_len {
                bail!("`ngrams.max_len` ({}) must equal `al.seq_len` ({})", n.max_len, a.seq_len);
            }
            if n.alphabet != a.alphabet {
                bail!("`ngrams.alphabet` must equal `al.alphabet`");
            }
        }
        let e = &self.eval;
        if e.preferences == 0 {
            bail!("`eval.preferences` must be at least 1");
        }
        if e.k < 2 || e.samples < e.k {
            bail!("`eval` needs 2 <= k <= samples, got k={} samples={}", e.k, e.samples);
        }
        if !e.hv_ref.is_finite() {
            bail!("`eval.hv_ref` must be finite");
        }
        if e.exact_check && (self.task, self.method) != (Task::Hypergrid, Method::MogfnPc) {
            bail!("`eval.exact_check` needs the hypergrid task with method mogfn_pc");
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

fn overlay(base: &mut Value, user: Value) {
    match (base, user) {
        (Value::Object(b), Value::Object(u)) => {
            for (k, v) in u {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => overlay(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn required<'a, T: Deserialize<'a>>(obj: &'a Map<String, Value>, key: &str) -> Result<T> {
    let v = obj.get(key).with_context(|| format!("missing field `{key}`"))?;
    T::deserialize(v).with_context(|| format!("invalid field `{key}`"))
}

/// Parses, fills defaults and validates a config held in memory.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let user: Value = serde_json::from_str(text).context("config is not valid JSON")?;
    let Value::Object(obj) = &user else { bail!("config must be a JSON object") };
    let task: Task = required(obj, "task")?;
    let method: Method = required(obj, "method")?;
    let mut merged = serde_json::to_value(ExperimentConfig::defaults(task, method)?)?;
    overlay(&mut merged, user);
    let mut cfg: ExperimentConfig = serde_json::from_value(merged).context("invalid config")?;
    cfg.set_seed(cfg.seed);
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_config_str(&text).with_context(|| format!("in {}", path.display()))
}
