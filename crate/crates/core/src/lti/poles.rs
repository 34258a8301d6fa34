use num_complex::Complex64;
use serde::Serialize;

use super::{eig_resolution, LtiError, StateSpace};
use crate::numerics::{gen_eig, hermitian_definiteness, spectral_abscissa, CMat, Mat};

#[derive(Clone, Debug, Serialize)]
pub struct PoleInfo {
    pub location: Complex64,
    pub multiplicity: usize,
    pub on_imaginary_axis: bool,
    /// residue of R(s) at the pole; populated only for simple poles on the
    /// imaginary axis, which is where the definition needs it
    pub residue: Option<CMat>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityInfo {
    pub abscissa: f64,
    pub tol: f64,
    pub stable: bool,
}

/// max Re < 0 with an absolute guard band scaled to the matrix.
pub fn internal_stability(sys: &StateSpace) -> Result<StabilityInfo, LtiError> {
    if sys.order() == 0 {
        return Ok(StabilityInfo {
            abscissa: f64::NEG_INFINITY,
            tol: 0.0,
            stable: true,
        });
    }
    let abscissa = spectral_abscissa(sys.a())?;
    let tol = 1e-9 * (1.0 + sys.a().frobenius_norm());
    Ok(StabilityInfo {
        abscissa,
        tol,
        stable: abscissa < -tol,
    })
}

/// C Phi_i B for every eigenvalue of A that is well separated from the
/// rest, where Phi_i = v w^T / (w^T v) is the spectral projector built
/// from matched right eigenvectors of A and A^T. Confluent eigenvalues
/// are skipped (their projectors are not rank one).
pub fn spectral_residues(sys: &StateSpace) -> Result<Vec<(Complex64, CMat)>, LtiError> {
    let n = sys.order();
    if n == 0 {
        return Ok(vec![]);
    }
    let res = eig_resolution(sys.a().frobenius_norm());
    let right = gen_eig(sys.a())?;
    let left = gen_eig(&sys.a().transpose())?;

    let mut out = Vec::new();
    for (i, &lam) in right.values.iter().enumerate() {
        let sep = right
            .values
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &mu)| (lam - mu).norm())
            .fold(f64::INFINITY, f64::min);
        if sep <= res {
            continue;
        }
        // both spectra are sorted the same way, so index i matches; verify
        let lam_left = left.values[i];
        if (lam - lam_left).norm() > res {
            return Err(LtiError::ClusteredEigenvalue(lam));
        }
        // w^T A = lam w^T with w the right eigenvector of A^T at lam
        let mut denom = Complex64::new(0.0, 0.0);
        for k in 0..n {
            denom += left.vectors.at(k, i) * right.vectors.at(k, i);
        }
        if denom.norm() < 1e-12 {
            return Err(LtiError::ClusteredEigenvalue(lam));
        }
        // residue = C v w^T B / (w^T v)
        let (p, m) = (sys.outputs(), sys.inputs());
        let mut cv = vec![Complex64::new(0.0, 0.0); p];
        for r in 0..p {
            for k in 0..n {
                cv[r] += Complex64::new(sys.c()[(r, k)], 0.0) * right.vectors.at(k, i);
            }
        }
        let mut wb = vec![Complex64::new(0.0, 0.0); m];
        for cc in 0..m {
            for k in 0..n {
                wb[cc] += left.vectors.at(k, i) * Complex64::new(sys.b()[(k, cc)], 0.0);
            }
        }
        let mut residue = CMat::zeros(p, m);
        for r in 0..p {
            for cc in 0..m {
                residue.set(r, cc, cv[r] * wb[cc] / denom);
            }
        }
        out.push((lam, residue));
    }
    Ok(out)
}

/// Pole listing with multiplicities (eigenvalues clustered at the
/// eigenvalue resolution) and residues attached to simple poles on the
/// imaginary axis.
pub fn poles_and_residues(sys: &StateSpace) -> Result<Vec<PoleInfo>, LtiError> {
    let n = sys.order();
    if n == 0 {
        return Ok(vec![]);
    }
    let res = eig_resolution(sys.a().frobenius_norm());
    let eigs = gen_eig(sys.a())?.values;
    let residues = spectral_residues(sys)?;

    // cluster sorted eigenvalues greedily
    let mut used = vec![false; n];
    let mut infos = Vec::new();
    for i in 0..n {
        if used[i] {
            continue;
        }
        let mut cluster = vec![i];
        used[i] = true;
        for j in (i + 1)..n {
            if !used[j] && (eigs[j] - eigs[i]).norm() <= res {
                used[j] = true;
                cluster.push(j);
            }
        }
        let location = eigs[i];
        let multiplicity = cluster.len();
        let on_imaginary_axis = location.re.abs() <= res;
        let residue = if multiplicity == 1 && on_imaginary_axis {
            residues
                .iter()
                .find(|(l, _)| (*l - location).norm() <= res)
                .map(|(_, r)| r.clone())
        } else {
            None
        };
        infos.push(PoleInfo {
            location,
            multiplicity,
            on_imaginary_axis,
            residue,
        });
    }
    Ok(infos)
}

#[derive(Clone, Debug, Serialize)]
pub struct MinimalityReport {
    pub controllable: bool,
    pub observable: bool,
    pub uncontrollable_modes: Vec<Complex64>,
    pub unobservable_modes: Vec<Complex64>,
}

impl MinimalityReport {
    pub fn is_minimal(&self) -> bool {
        self.controllable && self.observable
    }
}

/// PBH rank tests at every eigenvalue of A. Rank decisions go through the
/// Hermitian Gram matrix of [lambda I - A, B] (resp. the dual pair), whose
/// eigenvalue count must be halved because the complex matrices are
/// embedded as doubled real ones.
pub fn minimality(sys: &StateSpace) -> Result<MinimalityReport, LtiError> {
    let n = sys.order();
    let mut uncontrollable = Vec::new();
    let mut unobservable = Vec::new();
    if n == 0 {
        return Ok(MinimalityReport {
            controllable: true,
            observable: true,
            uncontrollable_modes: uncontrollable,
            unobservable_modes: unobservable,
        });
    }
    let eigs = gen_eig(sys.a())?.values;
    for &lam in &eigs {
        if pbh_rank_deficient(sys.a(), sys.b(), lam, false)? {
            uncontrollable.push(lam);
        }
        if pbh_rank_deficient(sys.a(), sys.c(), lam, true)? {
            unobservable.push(lam);
        }
    }
    Ok(MinimalityReport {
        controllable: uncontrollable.is_empty(),
        observable: unobservable.is_empty(),
        uncontrollable_modes: uncontrollable,
        unobservable_modes: unobservable,
    })
}

/// true when [lambda I - A, B] (or its observability dual) loses row rank
fn pbh_rank_deficient(
    a: &Mat,
    other: &Mat,
    lam: Complex64,
    dual: bool,
) -> Result<bool, LtiError> {
    let n = a.rows();
    let (a_used, o_used) = if dual {
        (a.transpose(), other.transpose())
    } else {
        (a.clone(), other.clone())
    };
    let cols = n + o_used.cols();
    let mut m = CMat::zeros(n, cols);
    for i in 0..n {
        for j in 0..n {
            let v = Complex64::new(-a_used[(i, j)], 0.0);
            m.set(i, j, if i == j { v + lam } else { v });
        }
        for j in 0..o_used.cols() {
            m.set(i, n + j, Complex64::new(o_used[(i, j)], 0.0));
        }
    }
    // row rank via M M^*
    let gram = m.matmul(&m.adjoint());
    let scale = 1.0 + gram.frobenius_norm();
    let report = hermitian_definiteness(&gram, 0.0)?;
    Ok(report.min_eig <= 1e-8 * scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn undamped_resonator_residue_at_upper_pole() {
        // 1/(s^2+1): residue at +j is 1/(2j) = -j/2
        let sys = StateSpace::siso_from_tf(&[1.0], &[1.0, 0.0, 1.0]).unwrap();
        let infos = poles_and_residues(&sys).unwrap();
        assert_eq!(infos.len(), 2);
        let upper = infos
            .iter()
            .find(|p| p.location.im > 0.5)
            .expect("pole at +j");
        assert!(upper.on_imaginary_axis);
        assert_eq!(upper.multiplicity, 1);
        let r = upper.residue.as_ref().expect("residue populated");
        assert!((r.at(0, 0) - Complex64::new(0.0, -0.5)).norm() < 1e-10);
    }

    #[test]
    fn residues_sum_to_cb_for_diagonalizable_system() {
        let sys = StateSpace::siso_from_tf(&[1.0, 0.5], &[2.0, 3.0, 1.0]).unwrap();
        let residues = spectral_residues(&sys).unwrap();
        assert_eq!(residues.len(), 2);
        let total: Complex64 = residues.iter().map(|(_, r)| r.at(0, 0)).sum();
        let cb = (sys.c() * sys.b())[(0, 0)];
        assert!((total - Complex64::new(cb, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn stable_pole_has_no_residue_attached() {
        let sys = StateSpace::siso_from_tf(&[1.0], &[1.0, 1.0]).unwrap();
        let infos = poles_and_residues(&sys).unwrap();
        assert_eq!(infos.len(), 1);
        assert!(!infos[0].on_imaginary_axis);
        assert!(infos[0].residue.is_none());
    }

    #[test]
    fn double_pole_reported_with_multiplicity() {
        // 1/(s+1)^2
        let sys = StateSpace::siso_from_tf(&[1.0], &[1.0, 2.0, 1.0]).unwrap();
        let infos = poles_and_residues(&sys).unwrap();
        assert_eq!(infos.len(), 1);
        assert_eq!(infos[0].multiplicity, 2);
    }

    #[test]
    fn pbh_flags_uncontrollable_mode() {
        let a = Mat::diag(&[-1.0, -2.0]);
        let b = Mat::from_rows(2, 1, &[1.0, 0.0]);
        let c = Mat::from_rows(1, 2, &[1.0, 1.0]);
        let sys = StateSpace::strictly_proper(a, b, c).unwrap();
        let rep = minimality(&sys).unwrap();
        assert!(!rep.controllable);
        assert!(rep.observable);
        assert_eq!(rep.uncontrollable_modes.len(), 1);
        assert!((rep.uncontrollable_modes[0].re + 2.0).abs() < 1e-9);
    }

    #[test]
    fn pbh_flags_unobservable_mode() {
        let a = Mat::diag(&[-1.0, -2.0]);
        let b = Mat::from_rows(2, 1, &[1.0, 1.0]);
        let c = Mat::from_rows(1, 2, &[0.0, 1.0]);
        let sys = StateSpace::strictly_proper(a, b, c).unwrap();
        let rep = minimality(&sys).unwrap();
        assert!(rep.controllable);
        assert!(!rep.observable);
        assert!((rep.unobservable_modes[0].re + 1.0).abs() < 1e-9);
    }

    #[test]
    fn minimal_system_passes_both_tests() {
        let sys = StateSpace::siso_from_tf(&[1.0], &[1.0, 0.2, 1.0]).unwrap();
        let rep = minimality(&sys).unwrap();
        assert!(rep.is_minimal());
    }

    #[test]
    fn internal_stability_verdicts() {
        let stable = StateSpace::siso_from_tf(&[1.0], &[1.0, 1.0]).unwrap();
        assert!(internal_stability(&stable).unwrap().stable);
        let marginal = StateSpace::siso_from_tf(&[1.0], &[1.0, 0.0, 1.0]).unwrap();
        assert!(!internal_stability(&marginal).unwrap().stable);
        let unstable = StateSpace::siso_from_tf(&[1.0], &[-1.0, 1.0]).unwrap();
        assert!(!internal_stability(&unstable).unwrap().stable);
    }
}
