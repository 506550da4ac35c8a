//! Performance model of the structured DAG: wasted capacity, queueing and
//! infection latency, the milestone tag model and secure-latency curves.

pub mod capacity;
pub mod delay;
pub mod format;
pub mod infection;
pub mod quad;
pub mod secure;
pub mod tags;

use thiserror::Error;

pub use capacity::{queue_length, theta, w1, w1_of_theta};
pub use delay::DelayCurve;
pub use infection::{infection_q1, infection_q1_sum, q1_bound, w2, W2};
pub use secure::{nakamoto_discounted_depth, secure_latency_mc, Convention, FailureRule, SecureCurve, SecureParams};
pub use tags::{type1_fraction, z_success_prob};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum AnalysisError {
    /// `rho / (1 - theta)` is at least one: the mempool grows without bound.
    #[error("unstable queue: rho/(1-theta) = {load:.6} >= 1")]
    Unstable { load: f64 },
    #[error("adversary share {adversary} is not below the effective honest share {honest}")]
    AdversaryMajority { adversary: f64, honest: f64 },
    #[error("{0}")]
    Domain(String),
}

pub(crate) fn domain(msg: impl Into<String>) -> AnalysisError {
    AnalysisError::Domain(msg.into())
}
