//! Scalarization of objective vectors, preference sampling and preference
//! encodings used to condition policies.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};
use crate::pareto::{ObjectiveVector, Preference};

/// Default lower bound on scalarized rewards.
pub const DEFAULT_FLOOR: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarizationKind {
    WeightedSum,
    WeightedTchebycheff,
    WeightedLogSum,
}

/// A scalarization function together with its utopian point and floor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scalarization {
    pub kind: ScalarizationKind,
    /// Ideal point for Tchebycheff; all ones when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utopian: Option<Vec<f64>>,
    #[serde(default = "default_floor")]
    pub floor: f64,
}

fn default_floor() -> f64 {
    DEFAULT_FLOOR
}

impl Default for Scalarization {
    fn default() -> Self {
        Self::new(ScalarizationKind::WeightedSum)
    }
}

impl Scalarization {
    pub fn new(kind: ScalarizationKind) -> Self {
        Self { kind, utopian: None, floor: DEFAULT_FLOOR }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.floor > 0.0 && self.floor.is_finite()) {
            return Err(invalid(format!("scalarization floor must be positive, got {}", self.floor)));
        }
        if let Some(z) = &self.utopian {
            if z.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(invalid("utopian components must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    /// Maps `r` to a single reward under preference `omega`.
    ///
    /// Weighted Tchebycheff is turned into a maximization reward as
    /// `1 - max_i w_i |r_i - z_i|`. Every result is clamped below at the
    /// floor, and Tchebycheff is additionally clamped above at 1.
    pub fn scalarize(&self, r: &ObjectiveVector, omega: &Preference) -> Result<f64> {
        check_dim(r.dim(), omega.dim())?;
        let w = omega.weights();
        let r = r.values();
        let value = match self.kind {
            ScalarizationKind::WeightedSum => w.iter().zip(r).map(|(w, r)| w * r).sum::<f64>(),
            ScalarizationKind::WeightedLogSum => w
                .iter()
                .zip(r)
                .map(|(w, r)| r.max(self.floor).powf(*w))
                .product::<f64>(),
            ScalarizationKind::WeightedTchebycheff => {
                let worst = match &self.utopian {
                    Some(z) => {
                        check_dim(r.len(), z.len())?;
                        w.iter()
                            .zip(r)
                            .zip(z)
                            .map(|((w, r), z)| w * (r - z).abs())
                            .fold(0.0, f64::max)
                    }
                    None => w.iter().zip(r).map(|(w, r)| w * (r - 1.0).abs()).fold(0.0, f64::max),
                };
                (1.0 - worst).min(1.0)
            }
        };
        Ok(value.max(self.floor))
    }
}

/// Symmetric Dirichlet over the `d`-simplex.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirichletParam {
    pub alpha: f64,
    pub d: usize,
}

impl DirichletParam {
    pub fn new(alpha: f64, d: usize) -> Result<Self> {
        let p = Self { alpha, d };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(invalid(format!("dirichlet alpha must be positive, got {}", self.alpha)));
        }
        if self.d == 0 {
            return Err(invalid("dirichlet dimension must be at least 1"));
        }
        Ok(())
    }
}

/// Draws a preference from a symmetric Dirichlet by normalizing Gamma draws.
pub fn sample_preference<R: Rng + ?Sized>(p: &DirichletParam, rng: &mut R) -> Result<Preference> {
    p.validate()?;
    if p.d == 1 {
        return Preference::new(vec![1.0]);
    }
    let gamma = Gamma::new(p.alpha, 1.0).map_err(|e| invalid(e.to_string()))?;
    loop {
        let draws: Vec<f64> = (0..p.d).map(|_| gamma.sample(rng)).collect();
        let sum: f64 = draws.iter().sum();
        // Tiny alpha can underflow every component to zero.
        if sum > 0.0 && sum.is_finite() {
            return Preference::new(draws.into_iter().map(|g| g / sum).collect());
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermometerConfig {
    pub bins: usize,
    pub lo: f64,
    pub hi: f64,
}

impl ThermometerConfig {
    pub fn unit(bins: usize) -> Self {
        Self { bins, lo: 0.0, hi: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 {
            return Err(invalid("thermometer encoding needs at least one bin"));
        }
        if !(self.lo < self.hi) {
            return Err(invalid("thermometer range must satisfy lo < hi"));
        }
        Ok(())
    }
}

/// Bit `i` is set iff `(v - lo) / (hi - lo) >= (i + 1) / bins`.
pub fn thermometer_encode(v: f64, cfg: &ThermometerConfig) -> Result<Vec<bool>> {
    cfg.validate()?;
    if !v.is_finite() {
        return Err(invalid("thermometer input must be finite"));
    }
    let t = ((v.clamp(cfg.lo, cfg.hi)) - cfg.lo) / (cfg.hi - cfg.lo);
    let k = cfg.bins as f64;
    Ok((0..cfg.bins).map(|i| t >= (i + 1) as f64 / k).collect())
}

/// How a preference is presented to a policy network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreferenceEncoding {
    /// The weights as-is.
    Raw,
    /// Concatenated thermometer codes with `bins` bins over `[0, 1]`.
    Thermometer(usize),
    /// No conditioning input at all.
    Empty,
}

impl PreferenceEncoding {
    /// `0` bins selects the raw weights.
    pub fn from_bins(bins: usize) -> Self {
        if bins == 0 {
            Self::Raw
        } else {
            Self::Thermometer(bins)
        }
    }

    pub fn encoded_len(&self, d: usize) -> usize {
        match self {
            Self::Raw => d,
            Self::Thermometer(k) => d * k,
            Self::Empty => 0,
        }
    }
}

/// Encodes every component of `omega` and concatenates the codes.
pub fn encode_preference(omega: &Preference, encoding: PreferenceEncoding) -> Result<Vec<f64>> {
    match encoding {
        PreferenceEncoding::Raw => Ok(omega.weights().to_vec()),
        PreferenceEncoding::Empty => Ok(Vec::new()),
        PreferenceEncoding::Thermometer(bins) => {
            let cfg = ThermometerConfig::unit(bins);
            let mut out = Vec::with_capacity(omega.dim() * bins);
            for &w in omega.weights() {
                out.extend(thermometer_encode(w, &cfg)?.into_iter().map(|b| if b { 1.0 } else { 0.0 }));
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ov(v: &[f64]) -> ObjectiveVector {
        ObjectiveVector::new(v.to_vec()).unwrap()
    }

    fn pref(v: &[f64]) -> Preference {
        Preference::new(v.to_vec()).unwrap()
    }

    #[test]
    fn scalarization_examples() {
        let ws = Scalarization::new(ScalarizationKind::WeightedSum);
        assert!((ws.scalarize(&ov(&[0.2, 0.6]), &pref(&[0.5, 0.5])).unwrap() - 0.4).abs() < 1e-12);
        assert!((ws.scalarize(&ov(&[0.3, 0.9]), &pref(&[1.0, 0.0])).unwrap() - 0.3).abs() < 1e-12);

        let wl = Scalarization::new(ScalarizationKind::WeightedLogSum);
        assert!((wl.scalarize(&ov(&[0.4, 0.9]), &pref(&[0.5, 0.5])).unwrap() - 0.6).abs() < 1e-12);

        let wt = Scalarization {
            kind: ScalarizationKind::WeightedTchebycheff,
            utopian: Some(vec![1.0, 1.0]),
            floor: DEFAULT_FLOOR,
        };
        assert!((wt.scalarize(&ov(&[0.2, 0.6]), &pref(&[0.5, 0.5])).unwrap() - 0.6).abs() < 1e-12);

        assert!(ws.scalarize(&ov(&[0.2]), &pref(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn zero_rewards_hit_the_floor() {
        for kind in [
            ScalarizationKind::WeightedSum,
            ScalarizationKind::WeightedLogSum,
            ScalarizationKind::WeightedTchebycheff,
        ] {
            let s = Scalarization::new(kind);
            let v = s.scalarize(&ov(&[0.0, 0.0]), &pref(&[0.5, 0.5])).unwrap();
            assert!(v >= DEFAULT_FLOOR && v.is_finite(), "{kind:?} gave {v}");
        }
    }

    #[test]
    fn dirichlet_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for alpha in [0.1, 1.0, 10.0] {
            let p = sample_preference(&DirichletParam::new(alpha, 1).unwrap(), &mut rng).unwrap();
            assert_eq!(p.weights(), &[1.0]);
        }

        let param = DirichletParam::new(1.0, 3).unwrap();
        let a = sample_preference(&param, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = sample_preference(&param, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a, b);

        let mut means = [0.0; 3];
        let n = 10_000;
        for _ in 0..n {
            let p = sample_preference(&param, &mut rng).unwrap();
            for (m, w) in means.iter_mut().zip(p.weights()) {
                *m += w / n as f64;
            }
        }
        for m in means {
            assert!((m - 1.0 / 3.0).abs() < 0.02, "mean {m}");
        }

        // Small alpha must still land on the simplex.
        let sparse = DirichletParam::new(0.01, 4).unwrap();
        for _ in 0..200 {
            let p = sample_preference(&sparse, &mut rng).unwrap();
            assert!((p.weights().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert!(DirichletParam::new(0.0, 3).is_err());
    }

    #[test]
    fn thermometer_examples() {
        let cfg = ThermometerConfig::unit(4);
        assert_eq!(thermometer_encode(0.5, &cfg).unwrap(), vec![true, true, false, false]);
        assert_eq!(thermometer_encode(0.0, &cfg).unwrap(), vec![false; 4]);
        assert_eq!(thermometer_encode(1.0, &cfg).unwrap(), vec![true; 4]);
        assert_eq!(thermometer_encode(7.0, &cfg).unwrap(), vec![true; 4]);
        assert!(thermometer_encode(f64::NAN, &cfg).is_err());
    }

    #[test]
    fn preference_encodings() {
        let e = |w: &[f64], k| encode_preference(&pref(w), PreferenceEncoding::from_bins(k)).unwrap();
        assert_eq!(e(&[1.0, 0.0], 2), vec![1.0, 1.0, 0.0, 0.0]);
        assert_eq!(e(&[0.5, 0.5], 2), vec![1.0, 0.0, 1.0, 0.0]);
        assert_eq!(e(&[0.3, 0.7], 0), vec![0.3, 0.7]);
        assert!(encode_preference(&pref(&[1.0]), PreferenceEncoding::Empty).unwrap().is_empty());
        assert_eq!(PreferenceEncoding::Thermometer(50).encoded_len(3), 150);
    }

    fn simplex(d: usize) -> impl Strategy<Value = Preference> {
        prop::collection::vec(0.01..1.0f64, d).prop_map(|v| {
            let s: f64 = v.iter().sum();
            pref(&v.iter().map(|x| x / s).collect::<Vec<_>>())
        })
    }

    proptest! {
        #[test]
        fn thermometer_is_monotone(a in -0.5..1.5f64, b in -0.5..1.5f64, k in 1usize..60) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let cfg = ThermometerConfig::unit(k);
            let (x, y) = (thermometer_encode(lo, &cfg).unwrap(), thermometer_encode(hi, &cfg).unwrap());
            prop_assert!(x.iter().zip(&y).all(|(p, q)| !p | q));
        }

        #[test]
        fn log_sum_never_exceeds_weighted_sum(r in prop::collection::vec(1e-6..=1.0f64, 3), w in simplex(3)) {
            let r = ov(&r);
            let ws = Scalarization::new(ScalarizationKind::WeightedSum).scalarize(&r, &w).unwrap();
            let wl = Scalarization::new(ScalarizationKind::WeightedLogSum).scalarize(&r, &w).unwrap();
            prop_assert!(wl <= ws + 1e-12);
        }

        #[test]
        fn weighted_sums_are_monotone(r in prop::collection::vec(0.0..=1.0f64, 3),
                                      i in 0usize..3, bump in 0.0..1.0f64, w in simplex(3)) {
            for kind in [ScalarizationKind::WeightedSum, ScalarizationKind::WeightedLogSum] {
                let s = Scalarization::new(kind);
                let mut better = r.clone();
                better[i] = (better[i] + bump).min(1.0);
                let before = s.scalarize(&ov(&r), &w).unwrap();
                let after = s.scalarize(&ov(&better), &w).unwrap();
                prop_assert!(after >= before - 1e-12);
            }
        }

        #[test]
        fn outputs_stay_in_floor_to_one(r in prop::collection::vec(0.0..=1.0f64, 3), w in simplex(3)) {
            for kind in [ScalarizationKind::WeightedSum, ScalarizationKind::WeightedLogSum,
                         ScalarizationKind::WeightedTchebycheff] {
                let v = Scalarization::new(kind).scalarize(&ov(&r), &w).unwrap();
                prop_assert!((DEFAULT_FLOOR..=1.0 + 1e-12).contains(&v));
            }
        }

        #[test]
        fn unit_preference_selects_that_objective(pts in prop::collection::vec(prop::collection::vec(0.0..=1.0f64, 3), 1..20),
                                                  i in 0usize..3) {
            let s = Scalarization::new(ScalarizationKind::WeightedSum);
            let w = Preference::unit(3, i).unwrap();
            let argmax = |f: &dyn Fn(&Vec<f64>) -> f64| {
                let mut best = 0;
                for (j, p) in pts.iter().enumerate() {
                    if f(p) > f(&pts[best]) { best = j; }
                }
                best
            };
            let by_scalar = argmax(&|p| s.scalarize(&ov(p), &w).unwrap());
            let by_objective = argmax(&|p| p[i].max(DEFAULT_FLOOR));
            prop_assert_eq!(by_scalar, by_objective);
        }
    }
}
