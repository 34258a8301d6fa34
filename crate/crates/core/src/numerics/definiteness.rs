use serde::Serialize;

use super::{sym_eig, CMat, Mat, NumericsError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Definiteness {
    PositiveDefinite,
    PositiveSemidefinite,
    NegativeDefinite,
    NegativeSemidefinite,
    Indefinite,
}

/// Eigenvalue-based definiteness report for a symmetric matrix.
#[derive(Clone, Debug, Serialize)]
pub struct DefinitenessReport {
    pub min_eig: f64,
    pub max_eig: f64,
    pub tol: f64,
    pub verdict: Definiteness,
}

impl DefinitenessReport {
    pub fn is_pd(&self) -> bool {
        self.min_eig > self.tol
    }
    pub fn is_psd(&self) -> bool {
        self.min_eig >= -self.tol
    }
    pub fn is_nd(&self) -> bool {
        self.max_eig < -self.tol
    }
    pub fn is_nsd(&self) -> bool {
        self.max_eig <= self.tol
    }

    fn classify(min_eig: f64, max_eig: f64, tol: f64) -> Definiteness {
        // definite verdicts take precedence; the zero matrix lands on PSD
        if min_eig > tol {
            Definiteness::PositiveDefinite
        } else if max_eig < -tol {
            Definiteness::NegativeDefinite
        } else if min_eig >= -tol {
            Definiteness::PositiveSemidefinite
        } else if max_eig <= tol {
            Definiteness::NegativeSemidefinite
        } else {
            Definiteness::Indefinite
        }
    }
}

/// Classify a symmetric matrix by its spectrum. `tol` is an absolute
/// eigenvalue threshold; inputs whose asymmetry exceeds the symmetry gate
/// are rejected rather than silently symmetrized.
pub fn definiteness(m: &Mat, tol: f64) -> Result<DefinitenessReport, NumericsError> {
    let eig = sym_eig(m)?;
    let (min_eig, max_eig) = if eig.values.is_empty() {
        (0.0, 0.0)
    } else {
        (eig.values[0], eig.values[eig.values.len() - 1])
    };
    Ok(DefinitenessReport {
        min_eig,
        max_eig,
        tol,
        verdict: DefinitenessReport::classify(min_eig, max_eig, tol),
    })
}

/// Same classification for a Hermitian complex matrix, computed through the
/// real embedding [[Re, -Im], [Im, Re]] (which doubles multiplicities but
/// preserves the extreme eigenvalues).
pub fn hermitian_definiteness(m: &CMat, tol: f64) -> Result<DefinitenessReport, NumericsError> {
    if !m.is_square() {
        return Err(NumericsError::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let scale = 1.0 + m.frobenius_norm();
    let asym = m.hermitian_asymmetry();
    if asym > 1e-9 * scale {
        return Err(NumericsError::NotSymmetric {
            asymmetry: asym,
            tol: 1e-9 * scale,
        });
    }
    definiteness(&m.hermitian_part().hermitian_embedding(), tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn zero_matrix_is_psd_by_precedence() {
        let r = definiteness(&Mat::zeros(3, 3), 1e-9).unwrap();
        assert_eq!(r.verdict, Definiteness::PositiveSemidefinite);
        assert!(r.is_psd());
        assert!(r.is_nsd());
        assert!(!r.is_pd());
        assert!(!r.is_nd());
    }

    #[test]
    fn classifies_definite_and_indefinite() {
        let pd = definiteness(&Mat::diag(&[1.0, 2.0]), 1e-9).unwrap();
        assert_eq!(pd.verdict, Definiteness::PositiveDefinite);
        let nd = definiteness(&Mat::diag(&[-1.0, -2.0]), 1e-9).unwrap();
        assert_eq!(nd.verdict, Definiteness::NegativeDefinite);
        let ind = definiteness(&Mat::diag(&[1.0, -1.0]), 1e-9).unwrap();
        assert_eq!(ind.verdict, Definiteness::Indefinite);
        let psd = definiteness(&Mat::diag(&[1.0, 0.0]), 1e-9).unwrap();
        assert_eq!(psd.verdict, Definiteness::PositiveSemidefinite);
        let nsd = definiteness(&Mat::diag(&[-1.0, 0.0]), 1e-9).unwrap();
        assert_eq!(nsd.verdict, Definiteness::NegativeSemidefinite);
    }

    #[test]
    fn rejects_asymmetric_input() {
        let m = Mat::from_rows(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(
            definiteness(&m, 1e-9),
            Err(NumericsError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn hermitian_psd_via_embedding() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3
        let mut m = CMat::zeros(2, 2);
        m.set(0, 0, Complex64::new(2.0, 0.0));
        m.set(0, 1, Complex64::new(0.0, 1.0));
        m.set(1, 0, Complex64::new(0.0, -1.0));
        m.set(1, 1, Complex64::new(2.0, 0.0));
        let r = hermitian_definiteness(&m, 1e-9).unwrap();
        assert_eq!(r.verdict, Definiteness::PositiveDefinite);
        assert!((r.min_eig - 1.0).abs() < 1e-12);
        assert!((r.max_eig - 3.0).abs() < 1e-12);
    }
}
