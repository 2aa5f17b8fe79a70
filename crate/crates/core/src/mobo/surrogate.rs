use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};
use crate::mobo::Featurizer;
use crate::neural::{adam_step, AdamState, Mlp, MlpGrads};
use crate::pareto::ObjectiveVector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateConfig {
    pub members: usize,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self { members: 5, hidden: vec![32], epochs: 150, lr: 0.01, seed: 0 }
    }
}

impl SurrogateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.members == 0 {
            return Err(invalid("the ensemble needs at least one member"));
        }
        if self.epochs == 0 {
            return Err(invalid("surrogate epochs must be at least 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(invalid("surrogate lr must be positive"));
        }
        Ok(())
    }
}

/// Mean squared error over every sample and output, and its gradient.
pub fn regression_loss_and_grads(net: &Mlp, x: &Array2<f64>, y: &Array2<f64>) -> Result<(f64, MlpGrads)> {
    check_dim(x.nrows(), y.nrows())?;
    check_dim(net.output_dim(), y.ncols())?;
    let (pred, cache) = net.forward_cached(x.clone())?;
    let diff = pred - y;
    let count = diff.len() as f64;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / count;
    let up = diff * (2.0 / count);
    let (grads, _) = net.backward_batch(&cache, up.view(), false)?;
    Ok((loss, grads))
}

/// Bootstrap ensemble of regressors from features to objectives. Member
/// predictions are clamped to `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSurrogate {
    members: Vec<Mlp>,
    resamples: Vec<Vec<usize>>,
    featurizer: Featurizer,
}

/// Fits every member on its own bootstrap resample of `data`.
pub fn fit_surrogate(
    data: &[(String, ObjectiveVector)],
    featurizer: &Featurizer,
    cfg: &SurrogateConfig,
) -> Result<EnsembleSurrogate> {
    cfg.validate()?;
    if data.len() < 2 {
        return Err(invalid("the surrogate needs at least two observations"));
    }
    let d = data[0].1.dim();
    let n = data.len();
    let mut x = Array2::zeros((n, featurizer.dim()));
    let mut y = Array2::zeros((n, d));
    for (i, (seq, obj)) in data.iter().enumerate() {
        check_dim(d, obj.dim())?;
        x.row_mut(i).assign(&ndarray::Array1::from(featurizer.featurize(seq)));
        y.row_mut(i).assign(&ndarray::Array1::from(obj.values().to_vec()));
    }
    let sizes: Vec<usize> = std::iter::once(featurizer.dim())
        .chain(cfg.hidden.iter().copied())
        .chain(std::iter::once(d))
        .collect();
    let mut members = Vec::with_capacity(cfg.members);
    let mut resamples = Vec::with_capacity(cfg.members);
    for m in 0..cfg.members {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(m as u64 + 1);
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let xb = x.select(Axis(0), &idx);
        let yb = y.select(Axis(0), &idx);
        let mut net = Mlp::new(&sizes, &mut rng)?;
        let mut adam = AdamState::new(cfg.lr);
        for _ in 0..cfg.epochs {
            let (_, grads) = regression_loss_and_grads(&net, &xb, &yb)?;
            adam_step(&mut net, &grads, &mut adam)?;
        }
        members.push(net);
        resamples.push(idx);
    }
    Ok(EnsembleSurrogate { members, resamples, featurizer: featurizer.clone() })
}

impl EnsembleSurrogate {
    pub fn from_members(members: Vec<Mlp>, featurizer: Featurizer) -> Result<Self> {
        if members.is_empty() {
            return Err(invalid("the ensemble needs at least one member"));
        }
        for m in &members {
            check_dim(featurizer.dim(), m.input_dim())?;
            check_dim(members[0].output_dim(), m.output_dim())?;
        }
        let resamples = vec![Vec::new(); members.len()];
        Ok(Self { members, resamples, featurizer })
    }

    pub fn num_members(&self) -> usize {
        self.members.len()
    }

    pub fn output_dim(&self) -> usize {
        self.members[0].output_dim()
    }

    pub fn members(&self) -> &[Mlp] {
        &self.members
    }

    /// Bootstrap indices each member was trained on.
    pub fn resamples(&self) -> &[Vec<usize>] {
        &self.resamples
    }

    pub fn featurizer(&self) -> &Featurizer {
        &self.featurizer
    }

    /// Member predictions for a batch, `[member][sequence][objective]`.
    pub fn predict_members(&self, seqs: &[&str]) -> Result<Vec<Vec<Vec<f64>>>> {
        let mut x = Array2::zeros((seqs.len(), self.featurizer.dim()));
        for (i, s) in seqs.iter().enumerate() {
            x.row_mut(i).assign(&ndarray::Array1::from(self.featurizer.featurize(s)));
        }
        self.members
            .iter()
            .map(|m| {
                let out = m.forward_batch(x.view())?;
                Ok(out.rows().into_iter().map(|r| r.iter().map(|v| v.clamp(0.0, 1.0)).collect()).collect())
            })
            .collect()
    }

    /// Prediction of member `t`.
    pub fn posterior_draw(&self, t: usize, seq: &str) -> Result<ObjectiveVector> {
        let m = self
            .members
            .get(t)
            .ok_or_else(|| invalid(format!("member {t} out of range for {} members", self.members.len())))?;
        let raw = m.forward(&self.featurizer.featurize(seq))?;
        ObjectiveVector::new(raw.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
    }

    /// Mean of the member predictions.
    pub fn mean(&self, seq: &str) -> Result<ObjectiveVector> {
        let preds = self.predict_members(&[seq])?;
        let d = self.output_dim();
        let m = preds.len() as f64;
        ObjectiveVector::new((0..d).map(|j| preds.iter().map(|p| p[0][j]).sum::<f64>() / m).collect())
    }

    /// Per-objective variance of the member predictions.
    pub fn variance(&self, seq: &str) -> Result<Vec<f64>> {
        let preds = self.predict_members(&[seq])?;
        let mean = self.mean(seq)?;
        let m = preds.len() as f64;
        Ok(mean
            .values()
            .iter()
            .enumerate()
            .map(|(j, mu)| preds.iter().map(|p| (p[0][j] - mu).powi(2)).sum::<f64>() / m)
            .collect())
    }
}
