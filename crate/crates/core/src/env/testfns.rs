//! Two-dimensional benchmark functions in their usual closed forms.
//!
//! All of them are conventionally minimized; [`TestFunction::reward`] negates
//! them so that larger is better.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestFunction {
    #[serde(alias = "brannin")]
    Branin,
    Currin,
    Sphere,
    Shubert,
    Beale,
}

impl TestFunction {
    pub const ALL: [TestFunction; 5] = [
        TestFunction::Branin,
        TestFunction::Currin,
        TestFunction::Sphere,
        TestFunction::Shubert,
        TestFunction::Beale,
    ];

    /// Canonical input box, `[(lo_1, hi_1), (lo_2, hi_2)]`.
    pub fn domain(self) -> [(f64, f64); 2] {
        match self {
            TestFunction::Branin => [(-5.0, 10.0), (0.0, 15.0)],
            TestFunction::Currin => [(0.0, 1.0), (0.0, 1.0)],
            TestFunction::Sphere => [(-5.12, 5.12), (-5.12, 5.12)],
            TestFunction::Shubert => [(-10.0, 10.0), (-10.0, 10.0)],
            TestFunction::Beale => [(-4.5, 4.5), (-4.5, 4.5)],
        }
    }

    pub fn evaluate(self, x1: f64, x2: f64) -> f64 {
        match self {
            TestFunction::Branin => branin(x1, x2),
            TestFunction::Currin => currin(x1, x2),
            TestFunction::Sphere => sphere(x1, x2),
            TestFunction::Shubert => shubert(x1, x2),
            TestFunction::Beale => beale(x1, x2),
        }
    }

    /// Value at a point of the unit square, mapped affinely onto the domain
    /// and negated.
    pub fn reward(self, u1: f64, u2: f64) -> f64 {
        let [(a1, b1), (a2, b2)] = self.domain();
        -self.evaluate(a1 + u1 * (b1 - a1), a2 + u2 * (b2 - a2))
    }
}

pub fn branin(x1: f64, x2: f64) -> f64 {
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    (x2 - b * x1 * x1 + c * x1 - 6.0).powi(2) + 10.0 * (1.0 - t) * x1.cos() + 10.0
}

/// Currin exponential function; the `x2 -> 0` limit of the prefactor is 1.
pub fn currin(x1: f64, x2: f64) -> f64 {
    let prefactor = if x2 <= 0.0 { 1.0 } else { 1.0 - (-1.0 / (2.0 * x2)).exp() };
    let num = 2300.0 * x1.powi(3) + 1900.0 * x1 * x1 + 2092.0 * x1 + 60.0;
    let den = 100.0 * x1.powi(3) + 500.0 * x1 * x1 + 4.0 * x1 + 20.0;
    prefactor * num / den
}

pub fn sphere(x1: f64, x2: f64) -> f64 {
    x1 * x1 + x2 * x2
}

pub fn shubert(x1: f64, x2: f64) -> f64 {
    let term = |x: f64| (1..=5).map(|i| i as f64 * ((i as f64 + 1.0) * x + i as f64).cos()).sum::<f64>();
    term(x1) * term(x2)
}

pub fn beale(x1: f64, x2: f64) -> f64 {
    (1.5 - x1 + x1 * x2).powi(2)
        + (2.25 - x1 + x1 * x2 * x2).powi(2)
        + (2.625 - x1 + x1 * x2.powi(3)).powi(2)
}
