//! State-space models and the operations on them that the property tests
//! and stability results are built from: frequency response with pole
//! guards, parallel sums and feedback loops, pole/residue extraction
//! through spectral projectors, and PBH minimality checks.

mod connect;
mod freq;
mod poles;
mod ss;

pub use connect::{ni_to_pr, positive_feedback, sum};
pub use freq::FrequencyEvaluator;
pub use poles::{
    internal_stability, minimality, poles_and_residues, spectral_residues, MinimalityReport,
    PoleInfo, StabilityInfo,
};
pub use ss::StateSpace;

use crate::numerics::NumericsError;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LtiError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(
        "evaluation point {at} is within {distance:.3e} of a pole; the resolvent is unreliable there"
    )]
    NearPole { at: Complex64, distance: f64 },
    #[error("feedback loop is ill posed: I - D1*D2 is singular or near-singular (cond ~ {cond:.3e})")]
    IllPosedLoop { cond: f64 },
    #[error("A must be nonsingular here: {0}")]
    SingularA(String),
    #[error("feedthrough must vanish here: {0}")]
    NonzeroFeedthrough(String),
    #[error("realization is not minimal: {0}")]
    NotMinimal(String),
    #[error("eigenvalue {0} is too close to another to separate its eigenvector reliably")]
    ClusteredEigenvalue(Complex64),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Absolute tolerance used to decide whether an eigenvalue sits on the
/// imaginary axis, or whether two eigenvalues coincide, for a matrix of
/// the given Frobenius norm.
pub fn eig_resolution(a_norm: f64) -> f64 {
    1e-7 * (1.0 + a_norm)
}
