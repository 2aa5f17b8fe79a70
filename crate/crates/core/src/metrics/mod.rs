//! Quality indicators for fronts and candidate sets.

mod hypervolume;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};
use crate::pareto::{Candidate, Front, ObjectiveVector, Preference};
use crate::scalarize::Scalarization;

pub use hypervolume::{hypervolume, mc_hypervolume_oracle, HvRef, MAX_EXACT_DIM};
pub(crate) use hypervolume::hypervolume_slices;

/// Label attached to every reported diversity value.
pub const DIVERSITY_DEFINITION: &str = "mean pairwise distance among the top-k candidates by reward";

/// Reference weights and the utopian point of the R2 indicator.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceVectorSet {
    pub vectors: Vec<Preference>,
    pub utopian: ObjectiveVector,
}

/// Simplex lattice `{k / resolution : sum k = resolution}` with an all-ones
/// utopian point. The first coordinate decreases along the list.
pub fn uniform_reference_vectors(d: usize, resolution: usize) -> Result<ReferenceVectorSet> {
    if d == 0 {
        return Err(invalid("reference vectors need at least one dimension"));
    }
    if resolution == 0 {
        return Err(invalid("lattice resolution must be at least 1"));
    }
    let mut out = Vec::new();
    let mut counts = vec![0usize; d];
    lattice(&mut counts, 0, resolution, &mut out);
    let vectors = out
        .into_iter()
        .map(|c| {
            let mut w: Vec<f64> = c.iter().map(|&k| k as f64 / resolution as f64).collect();
            // Absorb rounding so every vector sums to one.
            let rest: f64 = w[..d - 1].iter().sum();
            w[d - 1] = (1.0 - rest).max(0.0);
            Preference::new(w)
        })
        .collect::<Result<_>>()?;
    Ok(ReferenceVectorSet { vectors, utopian: ObjectiveVector::new(vec![1.0; d])? })
}

fn lattice(counts: &mut Vec<usize>, i: usize, left: usize, out: &mut Vec<Vec<usize>>) {
    if i == counts.len() - 1 {
        counts[i] = left;
        out.push(counts.clone());
        return;
    }
    for k in (0..=left).rev() {
        counts[i] = k;
        lattice(counts, i + 1, left - k, out);
    }
}

/// `(1/|Λ|) Σ_λ min_γ max_i λ_i |z*_i − γ_i|`; lower is better.
pub fn r2_indicator(front: &Front, refs: &ReferenceVectorSet) -> Result<f64> {
    if front.is_empty() {
        return Err(invalid("R2 of an empty front"));
    }
    if refs.vectors.is_empty() {
        return Err(invalid("R2 needs at least one reference vector"));
    }
    let z = refs.utopian.values();
    for p in front.points() {
        check_dim(z.len(), p.dim())?;
    }
    let mut total = 0.0;
    for lambda in &refs.vectors {
        check_dim(z.len(), lambda.dim())?;
        let best = front
            .points()
            .iter()
            .map(|g| {
                lambda
                    .weights()
                    .iter()
                    .zip(z)
                    .zip(g.values())
                    .map(|((l, z), g)| l * (z - g).abs())
                    .fold(0.0, f64::max)
            })
            .fold(f64::INFINITY, f64::min);
        total += best;
    }
    Ok(total / refs.vectors.len() as f64)
}

/// Mean over `approx` of the smallest deficit distance
/// `sqrt(Σ max(0, t_i − a_i)²)` to a point of `truth`.
pub fn gd_plus(approx: &Front, truth: &Front) -> Result<f64> {
    if approx.is_empty() {
        return Err(invalid("GD+ of an empty approximation"));
    }
    if truth.is_empty() {
        return Err(invalid("GD+ against an empty reference front"));
    }
    let d = truth.points()[0].dim();
    let mut total = 0.0;
    for a in approx.points() {
        check_dim(d, a.dim())?;
        let best = truth
            .points()
            .iter()
            .map(|t| {
                t.values()
                    .iter()
                    .zip(a.values())
                    .map(|(t, a)| (t - a).max(0.0).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        total += best;
    }
    Ok(total / approx.len() as f64)
}

/// Candidates generated for one test preference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub preference: Preference,
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn top_k(&self, scalarization: &Scalarization, k: usize) -> Result<Vec<(f64, &Candidate)>> {
        if self.candidates.len() < k {
            return Err(invalid(format!(
                "top-{k} requested from a set of {} candidates",
                self.candidates.len()
            )));
        }
        let mut scored: Vec<(f64, &Candidate)> = self
            .candidates
            .iter()
            .map(|c| Ok((scalarization.scalarize(&c.objectives, &self.preference)?, c)))
            .collect::<Result<_>>()?;
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        scored.truncate(k);
        Ok(scored)
    }
}

/// Mean over sets of the mean of the `k` largest scalarized rewards.
pub fn topk_reward(sets: &[CandidateSet], scalarization: &Scalarization, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    if sets.is_empty() {
        return Err(invalid("no candidate sets"));
    }
    let mut total = 0.0;
    for set in sets {
        let top = set.top_k(scalarization, k)?;
        total += top.iter().map(|(r, _)| r).sum::<f64>() / k as f64;
    }
    Ok(total / sets.len() as f64)
}

/// Mean over sets of the mean pairwise payload distance among the `k`
/// best candidates by scalarized reward.
pub fn topk_diversity(sets: &[CandidateSet], scalarization: &Scalarization, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(invalid("diversity needs k >= 2"));
    }
    if sets.is_empty() {
        return Err(invalid("no candidate sets"));
    }
    let mut total = 0.0;
    for set in sets {
        let top = set.top_k(scalarization, k)?;
        let mut sum = 0.0;
        for i in 0..k {
            for j in i + 1..k {
                sum += top[i].1.payload.distance(&top[j].1.payload)?;
            }
        }
        total += sum / (k * (k - 1) / 2) as f64;
    }
    Ok(total / sets.len() as f64)
}

/// Levenshtein distance over characters with unit costs.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = (diag + usize::from(ca != cb)).min(up + 1).min(row[j] + 1);
            diag = up;
        }
    }
    row[b.len()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pareto::Payload;
    use crate::scalarize::ScalarizationKind;
    use proptest::prelude::*;

    fn ov(v: &[f64]) -> ObjectiveVector {
        ObjectiveVector::new(v.to_vec()).unwrap()
    }

    fn front(rows: &[&[f64]]) -> Front {
        Front::new(rows.iter().map(|r| ov(r)).collect()).unwrap()
    }

    fn seq_set(weights: &[f64], items: &[(&str, f64)]) -> CandidateSet {
        CandidateSet {
            preference: Preference::new(weights.to_vec()).unwrap(),
            candidates: items
                .iter()
                .map(|(s, r)| Candidate { payload: Payload::Sequence(s.to_string()), objectives: ov(&[*r]) })
                .collect(),
        }
    }

    #[test]
    fn lattice_examples() {
        let refs = uniform_reference_vectors(2, 2).unwrap();
        let w: Vec<&[f64]> = refs.vectors.iter().map(Preference::weights).collect();
        assert_eq!(w, vec![&[1.0, 0.0][..], &[0.5, 0.5], &[0.0, 1.0]]);
        assert_eq!(uniform_reference_vectors(3, 4).unwrap().vectors.len(), 15);
        assert_eq!(uniform_reference_vectors(2, 15).unwrap().vectors.len(), 16);
        assert!(uniform_reference_vectors(3, 0).is_err());
        for v in uniform_reference_vectors(4, 7).unwrap().vectors {
            assert!((v.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn r2_examples() {
        let refs = ReferenceVectorSet {
            vectors: vec![Preference::unit(2, 0).unwrap(), Preference::unit(2, 1).unwrap()],
            utopian: ov(&[1.0, 1.0]),
        };
        assert_eq!(r2_indicator(&front(&[&[1.0, 1.0]]), &refs).unwrap(), 0.0);
        assert!((r2_indicator(&front(&[&[0.5, 0.5]]), &refs).unwrap() - 0.5).abs() < 1e-12);
        // Each unit vector picks the point best in its own coordinate.
        let two = front(&[&[0.9, 0.2], &[0.3, 0.6]]);
        assert!((r2_indicator(&two, &refs).unwrap() - (0.1 + 0.4) / 2.0).abs() < 1e-12);
        assert!(r2_indicator(&Front::default(), &refs).is_err());
    }

    #[test]
    fn gd_plus_examples() {
        let t = front(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(gd_plus(&t, &t).unwrap(), 0.0);
        assert_eq!(gd_plus(&front(&[&[1.0, 1.0]]), &front(&[&[0.5, 0.5]])).unwrap(), 0.0);
        assert!((gd_plus(&front(&[&[0.5, 1.0]]), &front(&[&[1.0, 1.0]])).unwrap() - 0.5).abs() < 1e-12);
        let two_deficits = gd_plus(&front(&[&[0.0, 0.0]]), &front(&[&[0.3, 0.4]])).unwrap();
        assert!((two_deficits - 0.5).abs() < 1e-12);
        assert!(gd_plus(&Front::default(), &t).is_err());
    }

    #[test]
    fn topk_reward_examples() {
        let ws = Scalarization::new(ScalarizationKind::WeightedSum);
        let set = seq_set(&[1.0], &[("A", 0.1), ("B", 0.5), ("C", 0.9)]);
        assert!((topk_reward(std::slice::from_ref(&set), &ws, 2).unwrap() - 0.7).abs() < 1e-12);
        assert!((topk_reward(std::slice::from_ref(&set), &ws, 3).unwrap() - 0.5).abs() < 1e-12);
        let same = seq_set(&[1.0], &[("A", 0.4), ("B", 0.4)]);
        assert!((topk_reward(&[same], &ws, 2).unwrap() - 0.4).abs() < 1e-12);
        assert!(topk_reward(&[set], &ws, 4).is_err());
    }

    #[test]
    fn topk_diversity_examples() {
        let ws = Scalarization::new(ScalarizationKind::WeightedSum);
        let same = seq_set(&[1.0], &[("ACV", 0.5), ("ACV", 0.5), ("ACV", 0.5)]);
        assert_eq!(topk_diversity(&[same], &ws, 3).unwrap(), 0.0);
        let pair = seq_set(&[1.0], &[("AAAA", 0.5), ("AAAB", 0.5)]);
        assert_eq!(topk_diversity(&[pair.clone()], &ws, 2).unwrap(), 1.0);
        let three = seq_set(&[1.0], &[("AB", 0.3), ("CD", 0.2), ("AD", 0.1)]);
        assert!((topk_diversity(&[three], &ws, 3).unwrap() - 4.0 / 3.0).abs() < 1e-12);
        assert!(topk_diversity(&[pair], &ws, 1).is_err());
    }

    #[test]
    fn diversity_uses_the_best_candidates() {
        let ws = Scalarization::new(ScalarizationKind::WeightedSum);
        let set = seq_set(&[1.0], &[("AAAA", 0.9), ("BBBB", 0.1), ("AAAB", 0.8)]);
        assert_eq!(topk_diversity(&[set], &ws, 2).unwrap(), 1.0);
    }

    #[test]
    fn edit_distance_examples() {
        assert_eq!(edit_distance("kitten", "sitting"), 3);
        assert_eq!(edit_distance("", "abc"), 3);
        assert_eq!(edit_distance("abc", ""), 3);
        assert_eq!(edit_distance("flaw", "lawn"), 2);
        assert_eq!(edit_distance("same", "same"), 0);
    }

    /// Full-matrix recursion kept separate from the rolling-row version.
    fn edit_distance_table(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for i in 0..=a.len() {
            for j in 0..=b.len() {
                t[i][j] = if i == 0 {
                    j
                } else if j == 0 {
                    i
                } else {
                    let sub = t[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
                    sub.min(t[i - 1][j] + 1).min(t[i][j - 1] + 1)
                };
            }
        }
        t[a.len()][b.len()]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn edit_distance_is_a_metric(a in "[ABC]{0,8}", b in "[ABC]{0,8}", c in "[ABC]{0,8}") {
            let ab = edit_distance(&a, &b);
            prop_assert_eq!(ab, edit_distance_table(&a, &b));
            prop_assert_eq!(edit_distance(&a, &a), 0);
            prop_assert_eq!(ab == 0, a == b);
            prop_assert_eq!(ab, edit_distance(&b, &a));
            prop_assert!(edit_distance(&a, &c) <= ab + edit_distance(&b, &c));
        }
    }

    proptest! {
        #[test]
        fn r2_never_increases_when_points_are_added(
            pts in prop::collection::vec(prop::collection::vec(0.0..1.0f64, 2), 1..10),
            extra in prop::collection::vec(0.0..1.0f64, 2),
        ) {
            let refs = uniform_reference_vectors(2, 7).unwrap();
            let rows: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
            let before = r2_indicator(&front(&rows), &refs).unwrap();
            let mut more = rows.clone();
            more.push(&extra);
            prop_assert!(r2_indicator(&front(&more), &refs).unwrap() <= before + 1e-15);
        }

        #[test]
        fn gd_plus_is_non_negative(
            a in prop::collection::vec(prop::collection::vec(0.0..1.0f64, 2), 1..8),
            t in prop::collection::vec(prop::collection::vec(0.0..1.0f64, 2), 1..8),
        ) {
            let fa = front(&a.iter().map(|p| p.as_slice()).collect::<Vec<_>>());
            let ft = front(&t.iter().map(|p| p.as_slice()).collect::<Vec<_>>());
            prop_assert!(gd_plus(&fa, &ft).unwrap() >= 0.0);
            prop_assert_eq!(gd_plus(&ft, &ft).unwrap(), 0.0);
        }

        #[test]
        fn topk_reward_ignores_order(rewards in prop::collection::vec(0.0..1.0f64, 3..10), seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let ws = Scalarization::new(ScalarizationKind::WeightedSum);
            let names: Vec<String> = (0..rewards.len()).map(|i| format!("S{i}")).collect();
            let items: Vec<(&str, f64)> = names.iter().map(String::as_str).zip(rewards.iter().copied()).collect();
            let set = seq_set(&[1.0], &items);
            let mut shuffled = set.clone();
            shuffled.candidates.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = topk_reward(&[set], &ws, 3).unwrap();
            let b = topk_reward(&[shuffled], &ws, 3).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
