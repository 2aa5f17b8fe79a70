//! Objective vectors, preferences, candidates and Pareto dominance.
//!
//! Every objective is maximized. Environments normalize their rewards into
//! `[0, 1]` before handing them out, so fronts produced by this crate live in
//! the unit hypercube.

use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};

/// Tolerance on the simplex constraint of a [`Preference`].
pub const SIMPLEX_TOL: f64 = 1e-9;

/// `d` objective values for one candidate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectiveVector(Vec<f64>);

impl ObjectiveVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("objective vector must have at least one component"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("objective component {v}")));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// True when every component lies in `[0, 1]`.
    pub fn is_normalized(&self) -> bool {
        self.0.iter().all(|v| (0.0..=1.0).contains(v))
    }
}

impl AsRef<[f64]> for ObjectiveVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// A point on the probability simplex weighting the objectives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Preference(Vec<f64>);

impl Preference {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(invalid("preference must have at least one weight"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(invalid(format!("preference weights must be non-negative: {weights:?}")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(invalid(format!("preference weights sum to {sum}, not 1")));
        }
        Ok(Self(weights))
    }

    /// The `i`-th vertex of the `d`-simplex.
    pub fn unit(d: usize, i: usize) -> Result<Self> {
        if i >= d {
            return Err(invalid(format!("unit index {i} out of range for d = {d}")));
        }
        let mut w = vec![0.0; d];
        w[i] = 1.0;
        Self::new(w)
    }

    pub fn uniform(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(invalid("preference must have at least one weight"));
        }
        Self::new(vec![1.0 / d as f64; d])
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl TryFrom<Vec<f64>> for Preference {
    type Error = Error;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Preference> for Vec<f64> {
    fn from(p: Preference) -> Self {
        p.0
    }
}

/// The terminal object a candidate stands for.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Payload {
    /// Grid cell coordinates.
    Cell(Vec<usize>),
    /// Token sequence over a letter alphabet.
    Sequence(String),
}

impl Payload {
    /// L1 distance between cells, edit distance between sequences.
    pub fn distance(&self, other: &Payload) -> Result<f64> {
        match (self, other) {
            (Payload::Cell(a), Payload::Cell(b)) => {
                check_dim(a.len(), b.len())?;
                Ok(a.iter().zip(b).map(|(x, y)| x.abs_diff(*y)).sum::<usize>() as f64)
            }
            (Payload::Sequence(a), Payload::Sequence(b)) => {
                Ok(crate::metrics::edit_distance(a, b) as f64)
            }
            _ => Err(invalid("cannot compare a cell with a sequence")),
        }
    }
}

impl fmt::Display for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payload::Cell(c) => {
                let parts: Vec<String> = c.iter().map(|v| v.to_string()).collect();
                write!(f, "({})", parts.join(","))
            }
            Payload::Sequence(s) => f.write_str(s),
        }
    }
}

/// A terminal object together with its objective values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub payload: Payload,
    pub objectives: ObjectiveVector,
}

/// A set of objective vectors, optionally with the payloads that produced
/// them.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Front {
    points: Vec<ObjectiveVector>,
    payloads: Option<Vec<String>>,
    nondominated: bool,
}

impl Front {
    pub fn new(points: Vec<ObjectiveVector>) -> Result<Self> {
        if let Some(first) = points.first() {
            for p in &points {
                check_dim(first.dim(), p.dim())?;
            }
        }
        Ok(Self { points, payloads: None, nondominated: false })
    }

    pub fn with_payloads(points: Vec<ObjectiveVector>, payloads: Vec<String>) -> Result<Self> {
        check_dim(points.len(), payloads.len())?;
        let mut front = Self::new(points)?;
        front.payloads = Some(payloads);
        Ok(front)
    }

    pub fn from_candidates(candidates: &[Candidate]) -> Result<Self> {
        Self::with_payloads(
            candidates.iter().map(|c| c.objectives.clone()).collect(),
            candidates.iter().map(|c| c.payload.to_string()).collect(),
        )
    }

    pub fn points(&self) -> &[ObjectiveVector] {
        &self.points
    }

    pub fn payloads(&self) -> Option<&[String]> {
        self.payloads.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Dimension of the points, `None` for an empty front.
    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(ObjectiveVector::dim)
    }

    /// Whether the front is known to be mutually non-dominated.
    pub fn is_nondominated(&self) -> bool {
        self.nondominated
    }

    /// Adds a point. Clears the non-dominated flag.
    pub fn push(&mut self, point: ObjectiveVector, payload: Option<String>) -> Result<()> {
        if let Some(d) = self.dim() {
            check_dim(d, point.dim())?;
        }
        match (&mut self.payloads, payload) {
            (Some(p), Some(s)) => p.push(s),
            (None, None) => {}
            (None, Some(s)) if self.points.is_empty() => self.payloads = Some(vec![s]),
            _ => return Err(invalid("payload presence must match the rest of the front")),
        }
        self.points.push(point);
        self.nondominated = false;
        Ok(())
    }

    /// The non-dominated subset of this front.
    pub fn nondominated(&self) -> Result<Front> {
        let idx = nondominated_indices(&self.points)?;
        Ok(self.select(&idx, true))
    }

    fn select(&self, idx: &[usize], nondominated: bool) -> Front {
        Front {
            points: idx.iter().map(|&i| self.points[i].clone()).collect(),
            payloads: self
                .payloads
                .as_ref()
                .map(|p| idx.iter().map(|&i| p[i].clone()).collect()),
            nondominated,
        }
    }

    /// Writes the front as CSV with columns `obj_0..obj_{d-1}` and an
    /// optional `payload` column.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let d = self.dim().unwrap_or(0);
        let mut header: Vec<String> = (0..d).map(|i| format!("obj_{i}")).collect();
        if self.payloads.is_some() {
            header.push("payload".into());
        }
        w.write_record(&header)?;
        for (i, p) in self.points.iter().enumerate() {
            let mut row: Vec<String> = p.values().iter().map(|v| v.to_string()).collect();
            if let Some(payloads) = &self.payloads {
                row.push(payloads[i].clone());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Front> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let mut obj_cols = Vec::new();
        let mut payload_col = None;
        for (i, h) in headers.iter().enumerate() {
            if h == "payload" {
                payload_col = Some(i);
            } else if let Some(k) = h.strip_prefix("obj_") {
                let k: usize = k.parse().map_err(|_| invalid(format!("bad column `{h}`")))?;
                obj_cols.push((k, i));
            } else {
                return Err(invalid(format!("unexpected front column `{h}`")));
            }
        }
        obj_cols.sort_unstable();
        if obj_cols.iter().enumerate().any(|(pos, (k, _))| pos != *k) {
            return Err(invalid("objective columns must be obj_0..obj_{d-1}"));
        }
        let mut points = Vec::new();
        let mut payloads = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let mut values = Vec::with_capacity(obj_cols.len());
            for (_, col) in &obj_cols {
                let field = &rec[*col];
                values.push(
                    field
                        .parse::<f64>()
                        .map_err(|_| invalid(format!("bad objective value `{field}`")))?,
                );
            }
            points.push(ObjectiveVector::new(values)?);
            if let Some(col) = payload_col {
                payloads.push(rec[col].to_string());
            }
        }
        if payload_col.is_some() {
            Front::with_payloads(points, payloads)
        } else {
            Front::new(points)
        }
    }
}

/// True iff `a` is at least as good as `b` everywhere and strictly better
/// somewhere.
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> Result<bool> {
    check_dim(a.dim(), b.dim())?;
    Ok(dominates_slice(a.values(), b.values()))
}

pub(crate) fn dominates_slice(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return false;
        }
        if x > y {
            strict = true;
        }
    }
    strict
}

/// Indices of the non-dominated points, in input order. Exact duplicates keep
/// only their first occurrence.
pub fn nondominated_indices(points: &[ObjectiveVector]) -> Result<Vec<usize>> {
    let Some(first) = points.first() else {
        return Ok(Vec::new());
    };
    for p in points {
        check_dim(first.dim(), p.dim())?;
    }
    let mut unique: Vec<usize> = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        if !unique.iter().any(|&j| points[j] == *p) {
            unique.push(i);
        }
    }
    Ok(unique
        .iter()
        .copied()
        .filter(|&i| {
            !unique
                .iter()
                .any(|&j| dominates_slice(points[j].values(), points[i].values()))
        })
        .collect())
}

/// The points of `points` not dominated by any other point.
pub fn nondominated_filter(points: &[ObjectiveVector]) -> Result<Front> {
    let idx = nondominated_indices(points)?;
    Ok(Front {
        points: idx.iter().map(|&i| points[i].clone()).collect(),
        payloads: None,
        nondominated: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ov(v: &[f64]) -> ObjectiveVector {
        ObjectiveVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn dominance_examples() {
        assert!(dominates(&ov(&[1.0, 1.0]), &ov(&[0.0, 1.0])).unwrap());
        assert!(!dominates(&ov(&[1.0, 0.0]), &ov(&[0.0, 1.0])).unwrap());
        assert!(!dominates(&ov(&[0.5, 0.5]), &ov(&[0.5, 0.5])).unwrap());
        assert!(matches!(
            dominates(&ov(&[1.0]), &ov(&[1.0, 0.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn filter_examples() {
        let pts = vec![ov(&[1.0, 0.0]), ov(&[0.0, 1.0]), ov(&[0.5, 0.5]), ov(&[0.2, 0.2])];
        let front = nondominated_filter(&pts).unwrap();
        assert_eq!(front.points(), &pts[..3]);
        assert!(front.is_nondominated());

        let single = nondominated_filter(&[ov(&[1.0, 1.0])]).unwrap();
        assert_eq!(single.points(), &[ov(&[1.0, 1.0])]);

        assert!(nondominated_filter(&[]).unwrap().is_empty());
    }

    #[test]
    fn duplicates_keep_first_occurrence() {
        let pts = vec![ov(&[0.3, 0.7]), ov(&[0.7, 0.3]), ov(&[0.3, 0.7])];
        assert_eq!(nondominated_indices(&pts).unwrap(), vec![0, 1]);
    }

    #[test]
    fn preference_validation() {
        assert!(Preference::new(vec![0.5, 0.5]).is_ok());
        assert!(Preference::new(vec![0.6, 0.5]).is_err());
        assert!(Preference::new(vec![1.5, -0.5]).is_err());
        assert!(Preference::new(vec![]).is_err());
        let json = serde_json::to_string(&Preference::unit(3, 1).unwrap()).unwrap();
        assert_eq!(json, "[0.0,1.0,0.0]");
        assert!(serde_json::from_str::<Preference>("[0.2,0.2]").is_err());
    }

    #[test]
    fn payload_distances() {
        let a = Payload::Cell(vec![1, 4]);
        let b = Payload::Cell(vec![3, 1]);
        assert_eq!(a.distance(&b).unwrap(), 5.0);
        let s = Payload::Sequence("AAAA".into());
        let t = Payload::Sequence("AAAB".into());
        assert_eq!(s.distance(&t).unwrap(), 1.0);
        assert!(a.distance(&s).is_err());
        assert_eq!(a.to_string(), "(1,4)");
    }

    #[test]
    fn csv_round_trip() {
        let front = Front::with_payloads(
            vec![ov(&[0.1, 0.9]), ov(&[0.25, 0.5])],
            vec!["(0,1)".into(), "ACV".into()],
        )
        .unwrap();
        let mut buf = Vec::new();
        front.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("obj_0,obj_1,payload\n"));
        let back = Front::read_csv(&buf[..]).unwrap();
        assert_eq!(back.points(), front.points());
        assert_eq!(back.payloads(), front.payloads());
    }

    fn points_strategy(d: usize) -> impl Strategy<Value = Vec<ObjectiveVector>> {
        prop::collection::vec(prop::collection::vec(0u8..6, d), 0..40).prop_map(|rows| {
            rows.into_iter()
                .map(|r| ov(&r.iter().map(|&v| v as f64 / 5.0).collect::<Vec<_>>()))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn dominance_is_irreflexive_and_antisymmetric(a in prop::collection::vec(0.0..1.0f64, 3),
                                                      b in prop::collection::vec(0.0..1.0f64, 3)) {
            let (a, b) = (ov(&a), ov(&b));
            prop_assert!(!dominates(&a, &a).unwrap());
            if dominates(&a, &b).unwrap() {
                prop_assert!(!dominates(&b, &a).unwrap());
            }
        }

        #[test]
        fn filter_is_idempotent_and_covering(pts in points_strategy(3)) {
            let front = nondominated_filter(&pts).unwrap();
            let again = nondominated_filter(front.points()).unwrap();
            prop_assert_eq!(front.points(), again.points());
            for p in &pts {
                let kept = front.points().contains(p);
                let covered = front.points().iter().any(|q| dominates(q, p).unwrap());
                prop_assert!(kept || covered);
            }
            for a in front.points() {
                for b in front.points() {
                    prop_assert!(!dominates(a, b).unwrap());
                }
            }
        }
    }
}
