//! Modal models of flexible structures with collocated force actuators and
//! position sensors:
//!
//!   P(s) = sum_i psi_i psi_i' / (s^2 + kappa_i s + omega_i^2)
//!
//! Each mode contributes a rank-one symmetric term, which is what makes
//! these plants negative imaginary for any positive damping. The closed
//! forms for the response and its imaginary part serve as independent
//! oracles for the state-space machinery built elsewhere.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::lti::{LtiError, StateSpace};
use crate::numerics::{CMat, Mat};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Mode {
    /// natural frequency, > 0
    pub omega: f64,
    /// damping coefficient, >= 0 (zero leaves the pair on the imaginary axis)
    pub kappa: f64,
    /// mode shape at the actuator/sensor locations
    pub psi: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModalModel {
    modes: Vec<Mode>,
    /// number of collocated actuator/sensor pairs
    io_dim: usize,
}

impl ModalModel {
    pub fn new(modes: Vec<Mode>) -> Result<Self, LtiError> {
        let io_dim = modes
            .first()
            .map(|m| m.psi.len())
            .ok_or_else(|| LtiError::Dimension("a modal model needs at least one mode".into()))?;
        for (i, m) in modes.iter().enumerate() {
            if m.psi.len() != io_dim {
                return Err(LtiError::Dimension(format!(
                    "mode {i} has {} shape entries, expected {io_dim}",
                    m.psi.len()
                )));
            }
            if !(m.omega > 0.0) || !m.omega.is_finite() {
                return Err(LtiError::Dimension(format!(
                    "mode {i} has natural frequency {}, expected > 0",
                    m.omega
                )));
            }
            if !(m.kappa >= 0.0) || !m.kappa.is_finite() {
                return Err(LtiError::Dimension(format!(
                    "mode {i} has damping {}, expected >= 0",
                    m.kappa
                )));
            }
        }
        Ok(ModalModel { modes, io_dim })
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }
    pub fn io_dim(&self) -> usize {
        self.io_dim
    }
    pub fn min_kappa(&self) -> f64 {
        self.modes.iter().map(|m| m.kappa).fold(f64::INFINITY, f64::min)
    }
    pub fn max_omega(&self) -> f64 {
        self.modes.iter().map(|m| m.omega).fold(0.0, f64::max)
    }

    /// keep only the first `count` modes (design-model truncation)
    pub fn truncated(&self, count: usize) -> Result<ModalModel, LtiError> {
        ModalModel::new(self.modes.iter().take(count).cloned().collect())
    }

    /// Block-diagonal realization: per mode the states are (q, q'), with
    ///   q'' = -omega^2 q - kappa q' + psi' u,  y = sum psi q.
    pub fn realize(&self) -> StateSpace {
        let k = self.modes.len();
        let n = 2 * k;
        let m = self.io_dim;
        let mut a = Mat::zeros(n, n);
        let mut b = Mat::zeros(n, m);
        let mut c = Mat::zeros(m, n);
        for (i, mode) in self.modes.iter().enumerate() {
            let r = 2 * i;
            a[(r, r + 1)] = 1.0;
            a[(r + 1, r)] = -mode.omega * mode.omega;
            a[(r + 1, r + 1)] = -mode.kappa;
            for (j, &p) in mode.psi.iter().enumerate() {
                b[(r + 1, j)] = p;
                c[(j, r)] = p;
            }
        }
        StateSpace::strictly_proper(a, b, c).expect("shapes are consistent by construction")
    }

    /// Direct evaluation of the modal sum; independent of the state-space
    /// path and cheap enough to use as a reference everywhere.
    pub fn transfer_oracle(&self, s: Complex64) -> CMat {
        let m = self.io_dim;
        let mut out = CMat::zeros(m, m);
        for mode in &self.modes {
            let den = s * s + mode.kappa * s + mode.omega * mode.omega;
            let g = 1.0 / den;
            for i in 0..m {
                for j in 0..m {
                    let v = out.at(i, j) + g * mode.psi[i] * mode.psi[j];
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    /// Closed form for Im P(jw): each mode contributes
    /// -w kappa / ((omega^2 - w^2)^2 + w^2 kappa^2) psi psi', which is
    /// never positive for w >= 0.
    pub fn imag_part_oracle(&self, w: f64) -> Mat {
        let m = self.io_dim;
        let mut out = Mat::zeros(m, m);
        for mode in &self.modes {
            let a = mode.omega * mode.omega - w * w;
            let den = a * a + w * w * mode.kappa * mode.kappa;
            let g = -w * mode.kappa / den;
            for i in 0..m {
                for j in 0..m {
                    out[(i, j)] += g * mode.psi[i] * mode.psi[j];
                }
            }
        }
        out
    }

    /// Closed form for j[P(jw) - P(jw)*]. The response matrix is complex
    /// symmetric, so this equals -2 Im P(jw) and is PSD for all w >= 0.
    pub fn ni_matrix_oracle(&self, w: f64) -> Mat {
        self.imag_part_oracle(w).scale(-2.0)
    }
}

/// Deterministic pseudo-random flexible structure. Frequencies are drawn
/// in [0.5, 8], damping in [0.2, 1], mode-shape entries in [-1, 1]; the
/// ranges keep realizations well conditioned and integration horizons
/// short in the experiment suites. Shapes with norm below 0.1 are redrawn:
/// a practically decoupled mode would make the realization nonminimal.
pub fn random_structure(seed: u64, n_modes: usize, io_dim: usize) -> ModalModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::with_capacity(n_modes);
    for _ in 0..n_modes {
        let omega = rng.gen_range(0.5..8.0);
        let kappa = rng.gen_range(0.2..1.0);
        let psi: Vec<f64> = loop {
            let draw: Vec<f64> = (0..io_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if draw.iter().map(|p| p * p).sum::<f64>().sqrt() >= 0.1 {
                break draw;
            }
        };
        modes.push(Mode { omega, kappa, psi });
    }
    ModalModel::new(modes).expect("generated parameters are in range")
}
