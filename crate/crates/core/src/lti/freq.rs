use num_complex::Complex64;

use super::{eig_resolution, LtiError, StateSpace};
use crate::numerics::{eigenvalues, hermitian_definiteness, CLu, CMat};

/// Evaluates R(s) = D + C (sI - A)^{-1} B repeatedly for one system,
/// computing the spectrum of A once so every call can guard against
/// evaluation too close to a pole.
pub struct FrequencyEvaluator<'a> {
    sys: &'a StateSpace,
    eigs: Vec<Complex64>,
    guard: f64,
}

impl<'a> FrequencyEvaluator<'a> {
    pub fn new(sys: &'a StateSpace) -> Result<Self, LtiError> {
        let eigs = if sys.order() > 0 {
            eigenvalues(sys.a())?
        } else {
            vec![]
        };
        let guard = 1e-8 * (1.0 + sys.a().frobenius_norm());
        Ok(FrequencyEvaluator { sys, eigs, guard })
    }

    /// spectrum of A, sorted by (re, im)
    pub fn pole_locations(&self) -> &[Complex64] {
        &self.eigs
    }

    /// distance from s to the nearest pole
    pub fn pole_distance(&self, s: Complex64) -> f64 {
        self.eigs
            .iter()
            .map(|&l| (s - l).norm())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn transfer_at(&self, s: Complex64) -> Result<CMat, LtiError> {
        let n = self.sys.order();
        if n == 0 {
            return Ok(CMat::from_real(self.sys.d()));
        }
        let dist = self.pole_distance(s);
        if dist < self.guard {
            return Err(LtiError::NearPole { at: s, distance: dist });
        }
        let a = self.sys.a();
        let mut si_a = CMat::from_real(&-a);
        for i in 0..n {
            si_a.set(i, i, si_a.at(i, i) + s);
        }
        let x = CLu::new(&si_a)?.solve_mat(&CMat::from_real(self.sys.b()))?;
        let cx = CMat::from_real(self.sys.c()).matmul(&x);
        Ok(cx.add(&CMat::from_real(self.sys.d())))
    }

    /// j[R(jw) - R(jw)*], the Hermitian matrix whose positive
    /// semidefiniteness for all w > 0 defines the negative-imaginary
    /// property.
    pub fn ni_matrix_at(&self, omega: f64) -> Result<CMat, LtiError> {
        let r = self.transfer_at(Complex64::new(0.0, omega))?;
        let diff = r.sub(&r.adjoint());
        Ok(diff.scale(Complex64::new(0.0, 1.0)))
    }

    /// smallest eigenvalue of j[R(jw) - R(jw)*]
    pub fn ni_min_eig_at(&self, omega: f64) -> Result<f64, LtiError> {
        let m = self.ni_matrix_at(omega)?;
        Ok(hermitian_definiteness(&m, 0.0)?.min_eig)
    }

    /// absolute eigenvalue-coincidence resolution for this system
    pub fn resolution(&self) -> f64 {
        eig_resolution(self.sys.a().frobenius_norm())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ni_matrix_of_first_order_lag() {
        // R = 1/(s+1): j[R(jw) - R(jw)*] = 2w/(1+w^2); at w = 1 this is 1
        let sys = StateSpace::siso_from_tf(&[1.0], &[1.0, 1.0]).unwrap();
        let ev = FrequencyEvaluator::new(&sys).unwrap();
        let m = ev.ni_matrix_at(1.0).unwrap();
        assert!((m.at(0, 0) - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!((ev.ni_min_eig_at(1.0).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ni_matrix_of_undamped_style_resonator_with_damping() {
        // R = 1/(s^2 + 0.2 s + 1): R(j) = -5j, so j[R - R*] = 10
        let sys = StateSpace::siso_from_tf(&[1.0], &[1.0, 0.2, 1.0]).unwrap();
        let ev = FrequencyEvaluator::new(&sys).unwrap();
        let r = ev.transfer_at(Complex64::new(0.0, 1.0)).unwrap();
        assert!((r.at(0, 0) - Complex64::new(0.0, -5.0)).norm() < 1e-12);
        assert!((ev.ni_min_eig_at(1.0).unwrap() - 10.0).abs() < 1e-11);
    }

    #[test]
    fn evaluation_near_pole_is_refused() {
        // pole at s = ±j
        let sys = StateSpace::siso_from_tf(&[1.0], &[1.0, 0.0, 1.0]).unwrap();
        let ev = FrequencyEvaluator::new(&sys).unwrap();
        match ev.transfer_at(Complex64::new(0.0, 1.0 + 1e-12)) {
            Err(LtiError::NearPole { distance, .. }) => assert!(distance < 1e-10),
            other => panic!("expected NearPole, got {other:?}"),
        }
    }

    #[test]
    fn mirror_identity_below_axis() {
        // j[R(-jw) - R(-jw)*] = -(j[R(jw) - R(jw)*])^T for real systems
        let sys = StateSpace::siso_from_tf(&[1.0, 0.5], &[2.0, 0.7, 1.0]).unwrap();
        let ev = FrequencyEvaluator::new(&sys).unwrap();
        let up = ev.ni_matrix_at(1.3).unwrap();
        let r_down = ev.transfer_at(Complex64::new(0.0, -1.3)).unwrap();
        let down = r_down
            .sub(&r_down.adjoint())
            .scale(Complex64::new(0.0, 1.0));
        let want = up.transpose().scale(Complex64::new(-1.0, 0.0));
        assert!(down.approx_eq(&want, 1e-12));
    }
}
