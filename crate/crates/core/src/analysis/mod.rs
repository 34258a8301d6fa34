//! Negative imaginary analysis: verdicts, certificates, and the individual
//! tests (frequency sweep, LMI lemmas, Hamiltonian and SISO eigenvalue tests,
//! finite-bandwidth variants) together with a combining classifier.
//!
//! Every test reports through [`NiVerdict`]: the property that was
//! established, the method that established it, and evidence that a caller
//! can re-check independently (a certificate of matrices with residuals and
//! margins, or a frequency witness for failures found on a grid).

mod classify;
mod exact;
mod ffni;
mod lemmas;
mod sweep;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::lmi::{LmiError, SolverOpts};
use crate::lti::{LtiError, StateSpace};
use crate::numerics::{sym_eig, Mat, NumericsError};

pub use classify::classify;
pub use exact::{hamiltonian_ni_test, siso_ni_test};
pub use ffni::check_ffni;
pub use lemmas::{check_ni_lemma, check_ni_lmi, check_ssni, check_weak_sni};
pub use sweep::{default_grid, positive_real_check, sweep_ni};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NiProperty {
    /// negative imaginary on (0, inf)
    Ni,
    /// strictly negative imaginary
    Sni,
    /// strictly negative imaginary with nonvanishing limits at 0 and inf
    Ssni,
    /// negative imaginary up to the stated bandwidth only
    Ffni { bandwidth: f64 },
    /// positive real
    Pr,
    /// not established
    None,
}

impl NiProperty {
    /// partial order on the NI family; PR sits outside the chain
    pub fn at_least(&self, other: &NiProperty) -> bool {
        fn rank(p: &NiProperty) -> i32 {
            match p {
                NiProperty::Ssni => 3,
                NiProperty::Sni => 2,
                NiProperty::Ni => 1,
                _ => 0,
            }
        }
        rank(self) >= rank(other) && rank(other) > 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sweep,
    NiLemma,
    NiLmi,
    WeakSni,
    SsniLemma,
    FfniLmi,
    Hamiltonian,
    SisoExact,
    PositiveRealSweep,
    Combined,
}

/// Worst point found on a frequency grid; doubles as the failure witness.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FrequencyWitness {
    pub omega: f64,
    pub min_eigenvalue: f64,
}

/// Named matrices plus the residuals and eigenvalue margins a caller needs
/// to re-verify the claim without re-running the solver.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Certificate {
    pub matrices: Vec<(String, Mat)>,
    pub residuals: Vec<(String, f64)>,
    pub margins: Vec<(String, f64)>,
}

impl Certificate {
    pub fn matrix(&self, name: &str) -> Option<&Mat> {
        self.matrices.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn residual(&self, name: &str) -> Option<f64> {
        self.residuals.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    pub fn margin(&self, name: &str) -> Option<f64> {
        self.margins.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    pub fn push_matrix(&mut self, name: &str, m: Mat) {
        self.matrices.push((name.to_string(), m));
    }

    pub fn push_residual(&mut self, name: &str, v: f64) {
        self.residuals.push((name.to_string(), v));
    }

    pub fn push_margin(&mut self, name: &str, v: f64) {
        self.margins.push((name.to_string(), v));
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    Certificate(Certificate),
    Witness(FrequencyWitness),
    None,
}

impl Evidence {
    pub fn certificate(&self) -> Option<&Certificate> {
        match self {
            Evidence::Certificate(c) => Some(c),
            _ => None,
        }
    }

    pub fn witness(&self) -> Option<&FrequencyWitness> {
        match self {
            Evidence::Witness(w) => Some(w),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NiVerdict {
    pub property: NiProperty,
    pub method: Method,
    pub evidence: Evidence,
    pub caveats: Vec<String>,
}

impl NiVerdict {
    pub fn established(&self) -> bool {
        self.property != NiProperty::None
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        self.evidence.certificate()
    }

    pub(crate) fn failure(method: Method, caveat: String) -> Self {
        NiVerdict {
            property: NiProperty::None,
            method,
            evidence: Evidence::None,
            caveats: vec![caveat],
        }
    }
}

#[derive(Clone, Debug)]
pub struct AnalysisOptions {
    /// points in the default logarithmic frequency grid
    pub grid_points: usize,
    /// absolute slack granted to semidefiniteness checks, scaled by matrix size
    pub psd_tol: f64,
    pub solver: SolverOpts,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            grid_points: 500,
            psd_tol: 1e-9,
            solver: SolverOpts::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("transfer matrix must be square, got {outputs} outputs by {inputs} inputs")]
    NotSquare { outputs: usize, inputs: usize },
    #[error("realization is not minimal: {0}")]
    NotMinimal(String),
    #[error("A is singular, so the test does not apply")]
    SingularA,
    #[error("feedthrough matrix is not symmetric (asymmetry {asymmetry:.3e})")]
    AsymmetricFeedthrough { asymmetry: f64 },
    #[error("B must have full column rank {expected}, numerical rank is {rank}")]
    InputRankDeficient { rank: usize, expected: usize },
    #[error("C must have full row rank {expected}, numerical rank is {rank}")]
    OutputRankDeficient { rank: usize, expected: usize },
    #[error("(C, A) is not observable; unobservable modes near {0}")]
    NotObservable(String),
    #[error("R(jw) + R(jw)* has normal rank {rank}, full rank {expected} is required")]
    NormalRankDeficient { rank: usize, expected: usize },
    #[error("repeated pole on the imaginary axis near {0}")]
    RepeatedImaginaryPole(Complex64),
    #[error("A is not Hurwitz (spectral abscissa {abscissa:.3e})")]
    NotHurwitz { abscissa: f64 },
    #[error("CB + (CB)' is not positive definite (smallest eigenvalue {min_eig:.3e})")]
    IndefiniteQ { min_eig: f64 },
    #[error("test requires a scalar transfer function, got {outputs}x{inputs}")]
    SisoOnly { outputs: usize, inputs: usize },
    #[error("CB = {0:.3e} must be positive")]
    CbNotPositive(f64),
    #[error("hypothesis violated: {0}")]
    AssumptionViolated(String),
    #[error("independent tests disagree: {0}")]
    Conflict(String),
    #[error(transparent)]
    Lti(#[from] LtiError),
    #[error(transparent)]
    Lmi(#[from] LmiError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub(crate) fn require_square(sys: &StateSpace) -> Result<usize, AnalysisError> {
    if sys.outputs() != sys.inputs() {
        return Err(AnalysisError::NotSquare {
            outputs: sys.outputs(),
            inputs: sys.inputs(),
        });
    }
    Ok(sys.inputs())
}

pub(crate) fn require_symmetric_feedthrough(sys: &StateSpace) -> Result<(), AnalysisError> {
    let d = sys.d();
    let asym = d.asymmetry_norm();
    if asym > 1e-8 * (1.0 + d.frobenius_norm()) {
        return Err(AnalysisError::AsymmetricFeedthrough { asymmetry: asym });
    }
    Ok(())
}

pub(crate) fn require_minimal(sys: &StateSpace) -> Result<(), AnalysisError> {
    let report = crate::lti::minimality(sys)?;
    if !report.is_minimal() {
        let mut parts = Vec::new();
        if !report.controllable {
            parts.push(format!(
                "uncontrollable modes {:?}",
                report.uncontrollable_modes
            ));
        }
        if !report.observable {
            parts.push(format!("unobservable modes {:?}", report.unobservable_modes));
        }
        return Err(AnalysisError::NotMinimal(parts.join("; ")));
    }
    Ok(())
}

/// CB + (CB)', the matrix that controls the high-frequency behaviour of
/// w -> j w [R(jw) - R(jw)*].
pub(crate) fn high_frequency_gain(sys: &StateSpace) -> Mat {
    let cb = &(sys.c() * sys.b());
    (cb + &cb.transpose()).symmetrize()
}

/// Orthonormal basis of the (numerical) null space of a symmetric matrix,
/// or None when the matrix is definite enough that no null space exists.
/// The tolerance is deliberately tight: a direction only counts as null
/// when its eigenvalue is at round-off level, because callers turn these
/// directions into hard equality constraints.
pub(crate) fn symmetric_null_basis(q: &Mat) -> Result<Option<Mat>, NumericsError> {
    if q.rows() == 0 {
        return Ok(None);
    }
    let eig = sym_eig(q)?;
    let scale = eig
        .values
        .iter()
        .map(|v| v.abs())
        .fold(0.0f64, f64::max);
    let tol = 1e-10 * (1.0 + scale);
    let null_idx: Vec<usize> = (0..q.rows())
        .filter(|&i| eig.values[i].abs() <= tol)
        .collect();
    if null_idx.is_empty() {
        return Ok(None);
    }
    let mut basis = Mat::zeros(q.rows(), null_idx.len());
    for (col, &i) in null_idx.iter().enumerate() {
        for r in 0..q.rows() {
            basis[(r, col)] = eig.vectors[(r, i)];
        }
    }
    Ok(Some(basis))
}
