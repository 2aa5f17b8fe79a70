use rand::Rng;

use crate::error::{check_dim, invalid, Result};
use crate::pareto::{dominates_slice, Front, ObjectiveVector};

/// Largest dimension handled by the exact algorithm.
pub const MAX_EXACT_DIM: usize = 5;

/// Reference point of a hypervolume computation.
#[derive(Clone, Debug, PartialEq)]
pub struct HvRef(ObjectiveVector);

impl HvRef {
    pub fn new(point: ObjectiveVector) -> Self {
        Self(point)
    }

    pub fn origin(d: usize) -> Result<Self> {
        Ok(Self(ObjectiveVector::new(vec![0.0; d])?))
    }

    /// Every component set to `value`.
    pub fn constant(d: usize, value: f64) -> Result<Self> {
        Ok(Self(ObjectiveVector::new(vec![value; d])?))
    }

    pub fn point(&self) -> &ObjectiveVector {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }
}

/// Volume of the union of the boxes `[ref, p]` over the front. Points below
/// the reference are clipped to it.
pub fn hypervolume(front: &Front, reference: &HvRef) -> Result<f64> {
    let rows: Vec<&[f64]> = front.points().iter().map(ObjectiveVector::values).collect();
    hypervolume_slices(&rows, reference.point().values())
}

pub(crate) fn hypervolume_slices(points: &[&[f64]], reference: &[f64]) -> Result<f64> {
    let d = reference.len();
    if d > MAX_EXACT_DIM {
        return Err(invalid(format!(
            "exact hypervolume supports at most {MAX_EXACT_DIM} objectives, got {d}; use the Monte Carlo estimate"
        )));
    }
    let mut shifted = Vec::with_capacity(points.len());
    for p in points {
        check_dim(d, p.len())?;
        let q: Vec<f64> = p.iter().zip(reference).map(|(x, r)| (x - r).max(0.0)).collect();
        if q.iter().all(|&v| v > 0.0) {
            shifted.push(q);
        }
    }
    Ok(hv_positive(shifted))
}

/// Hypervolume against the origin of points with positive coordinates.
fn hv_positive(mut pts: Vec<Vec<f64>>) -> f64 {
    if pts.is_empty() {
        return 0.0;
    }
    let d = pts[0].len();
    match d {
        1 => pts.iter().map(|p| p[0]).fold(0.0, f64::max),
        2 => {
            pts.sort_by(|a, b| b[0].total_cmp(&a[0]).then(b[1].total_cmp(&a[1])));
            let mut area = 0.0;
            let mut top = 0.0;
            for p in &pts {
                if p[1] > top {
                    area += p[0] * (p[1] - top);
                    top = p[1];
                }
            }
            area
        }
        _ => {
            // Slice along the last axis, from the highest level down.
            pts = prune_dominated(pts);
            pts.sort_by(|a, b| b[d - 1].total_cmp(&a[d - 1]));
            let mut volume = 0.0;
            let mut active: Vec<Vec<f64>> = Vec::with_capacity(pts.len());
            for i in 0..pts.len() {
                active.push(pts[i][..d - 1].to_vec());
                let lower = if i + 1 < pts.len() { pts[i + 1][d - 1] } else { 0.0 };
                let height = pts[i][d - 1] - lower;
                if height > 0.0 {
                    volume += height * hv_positive(active.clone());
                }
            }
            volume
        }
    }
}

fn prune_dominated(pts: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
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

/// Monte Carlo estimate of the hypervolume: the dominated fraction of
/// `samples` uniform draws in the box spanned by the reference and the
/// componentwise maximum of the front, times the box volume.
pub fn mc_hypervolume_oracle<R: Rng + ?Sized>(
    front: &Front,
    reference: &HvRef,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    if samples == 0 {
        return Err(invalid("the Monte Carlo estimate needs at least one sample"));
    }
    let r = reference.point().values();
    let d = r.len();
    let pts: Vec<Vec<f64>> = front
        .points()
        .iter()
        .map(|p| {
            check_dim(d, p.dim())?;
            Ok(p.values().iter().zip(r).map(|(x, r)| x.max(*r)).collect())
        })
        .collect::<Result<_>>()?;
    if pts.is_empty() {
        return Ok(0.0);
    }
    let upper: Vec<f64> = (0..d).map(|i| pts.iter().map(|p| p[i]).fold(r[i], f64::max)).collect();
    let box_volume: f64 = upper.iter().zip(r).map(|(u, r)| u - r).product();
    if box_volume <= 0.0 {
        return Ok(0.0);
    }
    let mut z = vec![0.0; d];
    let mut hits = 0usize;
    for _ in 0..samples {
        for i in 0..d {
            z[i] = r[i] + rng.random::<f64>() * (upper[i] - r[i]);
        }
        if pts.iter().any(|p| p.iter().zip(&z).all(|(p, z)| z <= p)) {
            hits += 1;
        }
    }
    Ok(box_volume * hits as f64 / samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn front(rows: &[&[f64]]) -> Front {
        Front::new(rows.iter().map(|r| ObjectiveVector::new(r.to_vec()).unwrap()).collect()).unwrap()
    }

    #[test]
    fn examples() {
        let o = HvRef::origin(2).unwrap();
        assert_eq!(hypervolume(&front(&[&[1.0, 1.0]]), &o).unwrap(), 1.0);
        assert!((hypervolume(&front(&[&[0.5, 1.0], &[1.0, 0.5]]), &o).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(hypervolume(&Front::default(), &o).unwrap(), 0.0);
    }

    #[test]
    fn points_below_reference_are_clipped() {
        let r = HvRef::constant(2, 0.5).unwrap();
        assert_eq!(hypervolume(&front(&[&[0.2, 0.9], &[1.0, 1.0]]), &r).unwrap(), 0.25);
        let neg = HvRef::constant(2, -0.5).unwrap();
        assert!((hypervolume(&front(&[&[0.0, 0.0]]), &neg).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn three_dimensional_boxes_by_inclusion_exclusion() {
        let o = HvRef::origin(3).unwrap();
        let a = [1.0, 0.5, 0.5];
        let b = [0.5, 1.0, 0.25];
        // |A| + |B| - |A ∩ B| with A ∩ B = [0,.5]x[0,.5]x[0,.25].
        let expected = 0.25 + 0.125 - 0.0625;
        let hv = hypervolume(&front(&[&a, &b]), &o).unwrap();
        assert!((hv - expected).abs() < 1e-15);
    }

    #[test]
    fn refuses_high_dimensions() {
        let f = front(&[&[1.0; 6]]);
        assert!(hypervolume(&f, &HvRef::origin(6).unwrap()).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(mc_hypervolume_oracle(&f, &HvRef::origin(6).unwrap(), 100, &mut rng).is_ok());
    }

    #[test]
    fn monte_carlo_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let o = HvRef::origin(2).unwrap();
        assert_eq!(mc_hypervolume_oracle(&front(&[&[1.0, 1.0]]), &o, 1000, &mut rng).unwrap(), 1.0);
        assert_eq!(mc_hypervolume_oracle(&Front::default(), &o, 1000, &mut rng).unwrap(), 0.0);
        assert!(mc_hypervolume_oracle(&Front::default(), &o, 0, &mut rng).is_err());
    }

    fn rows(d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(0.0..1.0f64, d), 1..12)
    }

    proptest! {
        #[test]
        fn monotone_and_order_free(pts in rows(3), extra in prop::collection::vec(0.0..1.0f64, 3)) {
            let o = HvRef::origin(3).unwrap();
            let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
            let base = hypervolume(&front(&refs), &o).unwrap();
            let mut rev = refs.clone();
            rev.reverse();
            rev.push(refs[0]);
            prop_assert!((hypervolume(&front(&rev), &o).unwrap() - base).abs() < 1e-12);
            let mut more = refs.clone();
            more.push(&extra);
            let grown = hypervolume(&front(&more), &o).unwrap();
            prop_assert!(grown >= base - 1e-12);
            let dominated = refs.iter().any(|p| dominates_slice(p, &extra));
            if dominated {
                prop_assert!((grown - base).abs() < 1e-12);
            }
        }

        #[test]
        fn slicing_agrees_with_sweep_in_two_dimensions(pts in rows(2)) {
            // Lifting every point to height 1 in a third axis leaves the volume unchanged.
            let o2 = HvRef::origin(2).unwrap();
            let o3 = HvRef::origin(3).unwrap();
            let flat: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
            let lifted: Vec<Vec<f64>> = pts.iter().map(|p| vec![p[0], p[1], 1.0]).collect();
            let lifted_refs: Vec<&[f64]> = lifted.iter().map(|p| p.as_slice()).collect();
            let a = hypervolume(&front(&flat), &o2).unwrap();
            let b = hypervolume(&front(&lifted_refs), &o3).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
