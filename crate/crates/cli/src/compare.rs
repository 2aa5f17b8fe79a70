use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::run::MetricsRow;

fn flatten(prefix: &str, v: &Value, out: &mut BTreeMap<String, String>) {
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => {
            out.insert(prefix.to_string(), other.to_string());
        }
    }
}

struct Run {
    name: String,
    config: ExperimentConfig,
    fields: BTreeMap<String, String>,
    metrics: MetricsRow,
}

fn load(dir: &Path) -> Result<Run> {
    if !dir.is_dir() {
        bail!("run directory {} does not exist", dir.display());
    }
    let text = fs::read_to_string(dir.join("config.json"))
        .with_context(|| format!("{} has no config.json", dir.display()))?;
    let config: ExperimentConfig = serde_json::from_str(&text)?;
    let mut fields = BTreeMap::new();
    flatten("", &serde_json::to_value(&config)?, &mut fields);
    let metrics = MetricsRow::from_csv(
        &fs::read(dir.join("metrics.csv")).with_context(|| format!("{} has no metrics.csv", dir.display()))?,
    )?;
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| dir.display().to_string());
    Ok(Run { name, config, fields, metrics })
}

/// One CSV row per run: the config fields that differ between runs, then
/// the final metrics.
pub fn compare_runs(dirs: &[PathBuf]) -> Result<String> {
    if dirs.is_empty() {
        bail!("no runs to compare");
    }
    let runs = dirs.iter().map(|d| load(d)).collect::<Result<Vec<_>>>()?;
    let first = &runs[0];
    for r in &runs[1..] {
        if r.config.task != first.config.task {
            bail!("run {} has task {:?}, expected {:?}", r.name, r.config.task, first.config.task);
        }
        if r.config.eval != first.config.eval {
            bail!("run {} uses a different evaluation block", r.name);
        }
    }
    let keys: BTreeSet<&String> = runs.iter().flat_map(|r| r.fields.keys()).collect();
    let deltas: Vec<&String> =
        keys.into_iter().filter(|k| runs.iter().any(|r| r.fields.get(*k) != first.fields.get(*k))).collect();

    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = std::iter::once("run")
        .chain(deltas.iter().map(|k| k.as_str()))
        .chain(MetricsRow::HEADER[..5].iter().copied())
        .collect();
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &runs {
        let m = &r.metrics;
        let row: Vec<String> = std::iter::once(r.name.clone())
            .chain(deltas.iter().map(|k| r.fields.get(*k).cloned().unwrap_or_default()))
            .chain([m.hv.to_string(), m.r2.to_string(), opt(m.gd_plus), opt(m.topk_reward), opt(m.topk_diversity)])
            .collect();
        w.write_record(&row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}
