use num_complex::Complex64;
use serde::Serialize;

use super::{FrequencyEvaluator, LtiError};
use crate::numerics::{eigenvalues, solve_linear, Mat};

/// Real state-space realization (A, B, C, D) of x' = Ax + Bu, y = Cx + Du.
/// Zero-state systems (n = 0) are allowed and model static gains.
#[derive(Clone, Debug, Serialize)]
pub struct StateSpace {
    a: Mat,
    b: Mat,
    c: Mat,
    d: Mat,
}

impl StateSpace {
    pub fn new(a: Mat, b: Mat, c: Mat, d: Mat) -> Result<Self, LtiError> {
        if !a.is_square() {
            return Err(LtiError::Dimension(format!(
                "A is {}x{}, expected square",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        if b.rows() != n {
            return Err(LtiError::Dimension(format!(
                "B has {} rows, A is {n}x{n}",
                b.rows()
            )));
        }
        if c.cols() != n {
            return Err(LtiError::Dimension(format!(
                "C has {} columns, A is {n}x{n}",
                c.cols()
            )));
        }
        if d.rows() != c.rows() || d.cols() != b.cols() {
            return Err(LtiError::Dimension(format!(
                "D is {}x{}, expected {}x{}",
                d.rows(),
                d.cols(),
                c.rows(),
                b.cols()
            )));
        }
        for (m, name) in [(&a, "A"), (&b, "B"), (&c, "C"), (&d, "D")] {
            if !m.is_finite() {
                return Err(LtiError::Dimension(format!("{name} has non-finite entries")));
            }
        }
        Ok(StateSpace { a, b, c, d })
    }

    /// strictly proper system (D = 0)
    pub fn strictly_proper(a: Mat, b: Mat, c: Mat) -> Result<Self, LtiError> {
        let d = Mat::zeros(c.rows(), b.cols());
        StateSpace::new(a, b, c, d)
    }

    /// static gain y = Du
    pub fn static_gain(d: Mat) -> Self {
        let (p, m) = (d.rows(), d.cols());
        StateSpace {
            a: Mat::zeros(0, 0),
            b: Mat::zeros(0, m),
            c: Mat::zeros(p, 0),
            d,
        }
    }

    /// SISO system from transfer-function coefficients, both ascending in
    /// powers of s, denominator of strictly higher degree (controllable
    /// companion form).
    pub fn siso_from_tf(num: &[f64], den: &[f64]) -> Result<Self, LtiError> {
        let n = den.len().checked_sub(1).filter(|&n| n > 0).ok_or_else(|| {
            LtiError::Dimension("denominator must have degree at least 1".into())
        })?;
        if num.len() > n {
            return Err(LtiError::Dimension(
                "numerator degree must be below denominator degree".into(),
            ));
        }
        let lead = den[n];
        if lead == 0.0 {
            return Err(LtiError::Dimension("denominator leading coefficient is zero".into()));
        }
        let mut a = Mat::zeros(n, n);
        for i in 0..n.saturating_sub(1) {
            a[(i, i + 1)] = 1.0;
        }
        for j in 0..n {
            a[(n - 1, j)] = -den[j] / lead;
        }
        let mut b = Mat::zeros(n, 1);
        b[(n - 1, 0)] = 1.0 / lead;
        let mut c = Mat::zeros(1, n);
        for (j, &cj) in num.iter().enumerate() {
            c[(0, j)] = cj;
        }
        StateSpace::strictly_proper(a, b, c)
    }

    pub fn order(&self) -> usize {
        self.a.rows()
    }
    pub fn inputs(&self) -> usize {
        self.b.cols()
    }
    pub fn outputs(&self) -> usize {
        self.c.rows()
    }
    /// equal input and output count, the standing assumption for the
    /// negative-imaginary property
    pub fn is_square(&self) -> bool {
        self.inputs() == self.outputs()
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }
    pub fn b(&self) -> &Mat {
        &self.b
    }
    pub fn c(&self) -> &Mat {
        &self.c
    }
    pub fn d(&self) -> &Mat {
        &self.d
    }

    pub fn poles(&self) -> Result<Vec<Complex64>, LtiError> {
        Ok(eigenvalues(&self.a)?)
    }

    /// D - C A^{-1} B; fails when A is singular (pole at the origin).
    pub fn dc_gain(&self) -> Result<Mat, LtiError> {
        if self.order() == 0 {
            return Ok(self.d.clone());
        }
        let x = solve_linear(&self.a, &self.b)
            .map_err(|e| LtiError::SingularA(format!("DC gain needs A^-1 B: {e}")))?;
        Ok(&self.d - &(&self.c * &x))
    }

    /// R(s) = D + C (sI - A)^{-1} B at one point, with a pole guard.
    pub fn transfer_at(&self, s: Complex64) -> Result<crate::numerics::CMat, LtiError> {
        FrequencyEvaluator::new(self)?.transfer_at(s)
    }

    /// Split off the feedthrough: returns the strictly proper part and D.
    /// The full response is the sum of the two.
    pub fn strip_feedthrough(&self) -> (StateSpace, Mat) {
        (
            StateSpace {
                a: self.a.clone(),
                b: self.b.clone(),
                c: self.c.clone(),
                d: Mat::zeros(self.outputs(), self.inputs()),
            },
            self.d.clone(),
        )
    }

    /// Negated output: realization of -R(s).
    pub fn negated(&self) -> StateSpace {
        StateSpace {
            a: self.a.clone(),
            b: self.b.clone(),
            c: -&self.c,
            d: -&self.d,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub fn first_order_lag() -> StateSpace {
        // 1/(s+1)
        StateSpace::siso_from_tf(&[1.0], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn dc_gain_of_first_order_lag_is_one() {
        let g = first_order_lag().dc_gain().unwrap();
        assert!((g[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn transfer_of_first_order_lag_at_unit_frequency() {
        // 1/(1+j) = 0.5 - 0.5j
        let r = first_order_lag()
            .transfer_at(Complex64::new(0.0, 1.0))
            .unwrap();
        assert!((r.at(0, 0) - Complex64::new(0.5, -0.5)).norm() < 1e-14);
    }

    #[test]
    fn static_gain_has_no_states_and_constant_response() {
        let sys = StateSpace::static_gain(Mat::scalar(0.5));
        assert_eq!(sys.order(), 0);
        assert!((sys.dc_gain().unwrap()[(0, 0)] - 0.5).abs() < 1e-15);
        let r = sys.transfer_at(Complex64::new(0.0, 3.0)).unwrap();
        assert!((r.at(0, 0) - Complex64::new(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn tf_round_trip_second_order() {
        // (s + 2) / (s^2 + 0.4 s + 4)
        let sys = StateSpace::siso_from_tf(&[2.0, 1.0], &[4.0, 0.4, 1.0]).unwrap();
        let s = Complex64::new(0.3, 1.7);
        let want = (s + 2.0) / (s * s + 0.4 * s + 4.0);
        let got = sys.transfer_at(s).unwrap().at(0, 0);
        assert!((want - got).norm() < 1e-12);
    }

    #[test]
    fn dc_gain_fails_on_integrator() {
        let sys = StateSpace::siso_from_tf(&[1.0], &[0.0, 1.0]).unwrap();
        assert!(matches!(sys.dc_gain(), Err(LtiError::SingularA(_))));
    }

    #[test]
    fn rejects_inconsistent_shapes() {
        let a = Mat::identity(2);
        let b = Mat::zeros(3, 1);
        let c = Mat::zeros(1, 2);
        let d = Mat::zeros(1, 1);
        assert!(StateSpace::new(a, b, c, d).is_err());
    }
}
