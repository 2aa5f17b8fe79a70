use crate::error::{check_dim, invalid, Result};
use crate::metrics::{hypervolume, hypervolume_slices, HvRef};
use crate::mobo::{ALDataset, EnsembleSurrogate};
use crate::pareto::{dominates_slice, nondominated_indices, Front, ObjectiveVector};

/// Joint draws of a probabilistic model of the objectives.
pub trait Posterior: Sync {
    fn num_draws(&self) -> usize;

    fn output_dim(&self) -> usize;

    /// `[draw][sequence][objective]`.
    fn draws(&self, seqs: &[&str]) -> Result<Vec<Vec<Vec<f64>>>>;
}

impl Posterior for EnsembleSurrogate {
    fn num_draws(&self) -> usize {
        self.num_members()
    }

    fn output_dim(&self) -> usize {
        EnsembleSurrogate::output_dim(self)
    }

    fn draws(&self, seqs: &[&str]) -> Result<Vec<Vec<Vec<f64>>>> {
        self.predict_members(seqs)
    }
}

/// Non-dominated observations of a dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct ParetoPool {
    pub sequences: Vec<String>,
    pub objectives: Vec<ObjectiveVector>,
}

impl ParetoPool {
    pub fn from_dataset(data: &ALDataset) -> Result<Self> {
        let objectives: Vec<ObjectiveVector> = data.entries.iter().map(|(_, y)| y.clone()).collect();
        let idx = nondominated_indices(&objectives)?;
        Ok(Self {
            sequences: idx.iter().map(|&i| data.entries[i].0.clone()).collect(),
            objectives: idx.iter().map(|&i| objectives[i].clone()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn front(&self) -> Result<Front> {
        Front::with_payloads(self.objectives.clone(), self.sequences.clone())
    }
}

/// `HV(pool ∪ {y}) − HV(pool)`.
pub fn hvi(y: &ObjectiveVector, pool: &Front, reference: &HvRef) -> Result<f64> {
    check_dim(reference.dim(), y.dim())?;
    let base = hypervolume(pool, reference)?;
    let mut grown = pool.clone();
    grown.push(y.clone(), pool.payloads().map(|_| String::new()))?;
    Ok((hypervolume(&grown, reference)? - base).max(0.0))
}

/// Per-draw Pareto sets of the pool and the committed batch, ready to score
/// candidates against.
#[derive(Clone, Debug)]
pub struct NehviContext {
    sets: Vec<Vec<Vec<f64>>>,
    base: Vec<f64>,
    reference: Vec<f64>,
}

impl NehviContext {
    /// Draw `t` sees the pool and the committed sequences through its own
    /// predictions.
    pub fn new<P: Posterior + ?Sized>(
        posterior: &P,
        pool: &ParetoPool,
        committed: &[String],
        reference: &HvRef,
    ) -> Result<Self> {
        check_dim(posterior.output_dim(), reference.dim())?;
        if posterior.num_draws() == 0 {
            return Err(invalid("the posterior has no draws"));
        }
        let seqs: Vec<&str> =
            pool.sequences.iter().chain(committed.iter()).map(String::as_str).collect();
        let draws = if seqs.is_empty() {
            vec![Vec::new(); posterior.num_draws()]
        } else {
            posterior.draws(&seqs)?
        };
        let mut ctx = Self { sets: Vec::new(), base: Vec::new(), reference: reference.point().values().to_vec() };
        for pts in draws {
            let set = prune(pts);
            ctx.base.push(ctx.hv(&set)?);
            ctx.sets.push(set);
        }
        Ok(ctx)
    }

    fn hv(&self, pts: &[Vec<f64>]) -> Result<f64> {
        let rows: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        hypervolume_slices(&rows, &self.reference)
    }

    /// Adds `seq` to the committed batch.
    pub fn commit<P: Posterior + ?Sized>(&mut self, posterior: &P, seq: &str) -> Result<()> {
        let draws = posterior.draws(&[seq])?;
        for (t, mut d) in draws.into_iter().enumerate() {
            let y = d.remove(0);
            let mut set = std::mem::take(&mut self.sets[t]);
            set.push(y);
            let set = prune(set);
            self.base[t] = self.hv(&set)?;
            self.sets[t] = set;
        }
        Ok(())
    }

    /// Mean over draws of the hypervolume improvement, before any floor.
    pub fn score_batch<P: Posterior + ?Sized>(&self, posterior: &P, seqs: &[&str]) -> Result<Vec<f64>> {
        if seqs.is_empty() {
            return Ok(Vec::new());
        }
        let draws = posterior.draws(seqs)?;
        check_dim(self.sets.len(), draws.len())?;
        let mut out = vec![0.0; seqs.len()];
        for (t, preds) in draws.iter().enumerate() {
            for (i, y) in preds.iter().enumerate() {
                out[i] += self.improvement(t, y)?;
            }
        }
        let m = self.sets.len() as f64;
        Ok(out.into_iter().map(|v| v / m).collect())
    }

    pub fn score<P: Posterior + ?Sized>(&self, posterior: &P, seq: &str) -> Result<f64> {
        Ok(self.score_batch(posterior, &[seq])?[0])
    }

    fn improvement(&self, t: usize, y: &[f64]) -> Result<f64> {
        let set = &self.sets[t];
        if set.iter().any(|p| p.as_slice() == y || dominates_slice(p, y)) {
            return Ok(0.0);
        }
        if y.iter().zip(&self.reference).any(|(v, r)| v <= r) {
            return Ok(0.0);
        }
        let mut grown: Vec<&[f64]> = set.iter().map(Vec::as_slice).collect();
        grown.push(y);
        Ok((hypervolume_slices(&grown, &self.reference)? - self.base[t]).max(0.0))
    }
}

fn prune(pts: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut keep: Vec<Vec<f64>> = Vec::with_capacity(pts.len());
    for p in pts {
        if keep.iter().any(|q| q == &p || dominates_slice(q, &p)) {
            continue;
        }
        keep.retain(|q| !dominates_slice(&p, q));
        keep.push(p);
    }
    keep
}

/// `(1/M) Σ_t HVI(f_t(x) | P_t ∪ {f_t(c) : c ∈ committed})`, before any floor.
pub fn nehvi_score<P: Posterior + ?Sized>(
    seq: &str,
    posterior: &P,
    pool: &ParetoPool,
    committed: &[String],
    reference: &HvRef,
) -> Result<f64> {
    NehviContext::new(posterior, pool, committed, reference)?.score(posterior, seq)
}
