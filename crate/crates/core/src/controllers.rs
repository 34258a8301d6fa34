//! Controller families for collocated force-to-position loops.
//!
//! Each constructor returns a plain state-space realization: per-term
//! companion blocks stacked block-diagonally, no balancing, so the states
//! keep their physical meaning and the matrices can be written down by
//! hand in tests.

use thiserror::Error;

use crate::lti::LtiError;
use crate::numerics::{definiteness, Mat, NumericsError};
use crate::StateSpace;

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("invalid controller parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Lti(#[from] LtiError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Parameters shared by the second-order controller families: one
/// (gain, damping ratio, natural frequency) triple per term, all positive.
#[derive(Clone, Debug)]
pub struct PpfParams {
    pub terms: Vec<(f64, f64, f64)>,
}

impl PpfParams {
    pub fn single(k: f64, zeta: f64, omega: f64) -> Self {
        PpfParams {
            terms: vec![(k, zeta, omega)],
        }
    }

    fn validate(&self) -> Result<(), ControllerError> {
        if self.terms.is_empty() {
            return Err(ControllerError::InvalidParameter(
                "at least one term is required".into(),
            ));
        }
        for (i, &(k, zeta, omega)) in self.terms.iter().enumerate() {
            if !(k > 0.0 && k.is_finite()) {
                return Err(ControllerError::InvalidParameter(format!(
                    "term {i}: gain {k} must be positive"
                )));
            }
            if !(zeta > 0.0 && zeta.is_finite()) {
                return Err(ControllerError::InvalidParameter(format!(
                    "term {i}: damping ratio {zeta} must be positive"
                )));
            }
            if !(omega > 0.0 && omega.is_finite()) {
                return Err(ControllerError::InvalidParameter(format!(
                    "term {i}: natural frequency {omega} must be positive"
                )));
            }
        }
        Ok(())
    }
}

/// Assemble sum_i (c1_i + c2_i s) / (s^2 + 2 z_i w_i s + w_i^2) + d from
/// per-term companion blocks.
fn companion_sum(
    params: &PpfParams,
    numerator: impl Fn(f64, f64, f64) -> (f64, f64),
    feedthrough: impl Fn(f64) -> f64,
) -> Result<StateSpace, ControllerError> {
    params.validate()?;
    let n = 2 * params.terms.len();
    let mut a = Mat::zeros(n, n);
    let mut b = Mat::zeros(n, 1);
    let mut c = Mat::zeros(1, n);
    let mut d = 0.0;
    for (i, &(k, zeta, omega)) in params.terms.iter().enumerate() {
        let r = 2 * i;
        a.set_submatrix(
            r,
            r,
            &Mat::from_rows(2, 2, &[0.0, 1.0, -omega * omega, -2.0 * zeta * omega]),
        );
        b.set_submatrix(r, 0, &Mat::column(&[0.0, 1.0]));
        let (c0, c1) = numerator(k, zeta, omega);
        c.set_submatrix(0, r, &Mat::row(&[c0, c1]));
        d += feedthrough(k);
    }
    Ok(StateSpace::new(a, b, c, Mat::scalar(d))?)
}

/// Positive position feedback: sum_i k_i / (s^2 + 2 z_i w_i s + w_i^2).
/// Strictly proper, DC gain sum k_i / w_i^2, strictly negative imaginary.
pub fn make_ppf(params: &PpfParams) -> Result<StateSpace, ControllerError> {
    companion_sum(params, |k, _, _| (k, 0.0), |_| 0.0)
}

/// Resonant controller: sum_i -k_i s^2 / (s^2 + 2 z_i w_i s + w_i^2),
/// realized as the exact feedthrough -sum k_i plus the strictly proper
/// remainder k_i (2 z_i w_i s + w_i^2) per term. DC gain is zero.
pub fn make_resonant(params: &PpfParams) -> Result<StateSpace, ControllerError> {
    companion_sum(
        params,
        |k, zeta, omega| (k * omega * omega, k * 2.0 * zeta * omega),
        |k| -k,
    )
}

/// Velocity feedback through the same resonant poles:
/// sum_i k_i s / (s^2 + 2 z_i w_i s + w_i^2). Positive real rather than
/// negative imaginary; equals -C_res(jw)/(jw) term by term.
pub fn make_velocity_pr(params: &PpfParams) -> Result<StateSpace, ControllerError> {
    companion_sum(params, |k, _, _| (0.0, k), |_| 0.0)
}

/// Integral resonant controller (s I + Gamma Phi)^{-1} Gamma for
/// symmetric positive definite Gamma and Phi: realization
/// A = -Gamma Phi, B = Gamma, C = I, D = 0, so the DC gain is Phi^{-1}.
pub fn make_integral_resonant(gamma: &Mat, phi: &Mat) -> Result<StateSpace, ControllerError> {
    for (name, m) in [("Gamma", gamma), ("Phi", phi)] {
        if !m.is_square() {
            return Err(ControllerError::InvalidParameter(format!(
                "{name} must be square, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let scale = 1.0 + m.frobenius_norm();
        if m.asymmetry_norm() > 1e-9 * scale {
            return Err(ControllerError::InvalidParameter(format!(
                "{name} must be symmetric (asymmetry {:.3e})",
                m.asymmetry_norm()
            )));
        }
        let rep = definiteness(&m.symmetrize(), 1e-12 * scale)?;
        if !rep.is_pd() {
            return Err(ControllerError::InvalidParameter(format!(
                "{name} must be positive definite (smallest eigenvalue {:.3e})",
                rep.min_eig
            )));
        }
    }
    if gamma.rows() != phi.rows() {
        return Err(ControllerError::InvalidParameter(format!(
            "Gamma is {}x{} but Phi is {}x{}",
            gamma.rows(),
            gamma.cols(),
            phi.rows(),
            phi.cols()
        )));
    }
    let m = gamma.rows();
    let a = (gamma * phi).scale(-1.0);
    Ok(StateSpace::new(
        a,
        gamma.clone(),
        Mat::identity(m),
        Mat::zeros(m, m),
    )?)
}
