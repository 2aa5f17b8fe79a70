//! Preference-conditional GFlowNets for multi-objective generation.
//!
//! The crate covers the full pipeline: Pareto utilities and scalarizations,
//! a small dense network library, discrete environments, the conditional
//! trajectory-balance trainer with its exact-distribution checks, a
//! REINFORCE baseline, multi-objective indicators and an active-learning
//! loop driven by an ensemble surrogate.

pub mod baseline;
pub mod env;
pub mod error;
pub mod gflownet;
pub mod metrics;
pub mod mobo;
pub mod neural;
pub mod pareto;
pub mod scalarize;

pub use error::{Error, Result};
pub use pareto::{
    dominates, nondominated_filter, nondominated_indices, Candidate, Front, ObjectiveVector, Payload,
    Preference,
};
pub use scalarize::{
    encode_preference, sample_preference, DirichletParam, PreferenceEncoding, Scalarization,
    ScalarizationKind,
};
