use super::{LtiError, StateSpace};
use crate::numerics::{cond_1, solve_linear, Mat};

/// Parallel sum R1(s) + R2(s); inputs are shared, outputs added.
pub fn sum(s1: &StateSpace, s2: &StateSpace) -> Result<StateSpace, LtiError> {
    if s1.inputs() != s2.inputs() || s1.outputs() != s2.outputs() {
        return Err(LtiError::Dimension(format!(
            "cannot add a {}x{} system to a {}x{} system",
            s1.outputs(),
            s1.inputs(),
            s2.outputs(),
            s2.inputs()
        )));
    }
    let (n1, n2) = (s1.order(), s2.order());
    let mut a = Mat::zeros(n1 + n2, n1 + n2);
    a.set_submatrix(0, 0, s1.a());
    a.set_submatrix(n1, n1, s2.a());
    let mut b = Mat::zeros(n1 + n2, s1.inputs());
    b.set_submatrix(0, 0, s1.b());
    b.set_submatrix(n1, 0, s2.b());
    let mut c = Mat::zeros(s1.outputs(), n1 + n2);
    c.set_submatrix(0, 0, s1.c());
    c.set_submatrix(0, n1, s2.c());
    let d = s1.d() + s2.d();
    StateSpace::new(a, b, c, d)
}

/// Positive feedback loop of two square systems: u1 = w1 + y2 and
/// u2 = w2 + y1. Returns the 2m-input, 2m-output closed loop
/// (w1, w2) -> (y1, y2), whose A matrix decides internal stability.
/// Fails when the algebraic loop I - D1 D2 is (near) singular.
pub fn positive_feedback(s1: &StateSpace, s2: &StateSpace) -> Result<StateSpace, LtiError> {
    if s1.inputs() != s2.outputs() || s1.outputs() != s2.inputs() {
        return Err(LtiError::Dimension(format!(
            "feedback needs complementary shapes, got {}x{} against {}x{}",
            s1.outputs(),
            s1.inputs(),
            s2.outputs(),
            s2.inputs()
        )));
    }
    let m = s1.inputs();
    let i_m = Mat::identity(m);
    let loop1 = &i_m - &(s1.d() * s2.d());
    let cond = cond_1(&loop1);
    if !cond.is_finite() || cond > 1e10 {
        return Err(LtiError::IllPosedLoop { cond });
    }
    // theta1 = (I - D1 D2)^-1, theta2 = (I - D2 D1)^-1
    let theta1 = solve_linear(&loop1, &i_m).map_err(|_| LtiError::IllPosedLoop { cond })?;
    let loop2 = &i_m - &(s2.d() * s1.d());
    let theta2 = solve_linear(&loop2, &i_m).map_err(|_| LtiError::IllPosedLoop { cond })?;

    let (n1, n2) = (s1.order(), s2.order());
    let b1t2 = s1.b() * &theta2;
    let b2t1 = s2.b() * &theta1;

    let mut a = Mat::zeros(n1 + n2, n1 + n2);
    a.set_submatrix(0, 0, &(s1.a() + &(&(&b1t2 * s2.d()) * s1.c())));
    a.set_submatrix(0, n1, &(&b1t2 * s2.c()));
    a.set_submatrix(n1, 0, &(&b2t1 * s1.c()));
    a.set_submatrix(n1, n1, &(s2.a() + &(&(&b2t1 * s1.d()) * s2.c())));

    let mut b = Mat::zeros(n1 + n2, 2 * m);
    b.set_submatrix(0, 0, &b1t2);
    b.set_submatrix(0, m, &(&b1t2 * s2.d()));
    b.set_submatrix(n1, 0, &(&b2t1 * s1.d()));
    b.set_submatrix(n1, m, &b2t1);

    let t1c1 = &theta1 * s1.c();
    let t2c2 = &theta2 * s2.c();
    let mut c = Mat::zeros(2 * m, n1 + n2);
    c.set_submatrix(0, 0, &t1c1);
    c.set_submatrix(0, n1, &(&(&theta1 * s1.d()) * s2.c()));
    c.set_submatrix(m, 0, &(&(&theta2 * s2.d()) * s1.c()));
    c.set_submatrix(m, n1, &t2c2);

    let mut d = Mat::zeros(2 * m, 2 * m);
    d.set_submatrix(0, 0, &(&theta1 * s1.d()));
    d.set_submatrix(0, m, &(&(&theta1 * s1.d()) * s2.d()));
    d.set_submatrix(m, 0, &(&(&theta2 * s2.d()) * s1.d()));
    d.set_submatrix(m, m, &(&theta2 * s2.d()));

    StateSpace::new(a, b, c, d)
}

/// Realization of s R(s) for strictly proper R ~ (A, B, C, 0):
/// s C (sI-A)^{-1} B = CB + CA (sI-A)^{-1} B, so the result is
/// (A, B, CA, CB). Positive realness of this system is equivalent to the
/// negative-imaginary property of R.
pub fn ni_to_pr(sys: &StateSpace) -> Result<StateSpace, LtiError> {
    if sys.d().max_abs() != 0.0 {
        return Err(LtiError::NonzeroFeedthrough(
            "multiplication by s is only done on the strictly proper part; strip D first".into(),
        ));
    }
    StateSpace::new(
        sys.a().clone(),
        sys.b().clone(),
        sys.c() * sys.a(),
        sys.c() * sys.b(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn sum_of_two_lags_dc_gain() {
        // 1/(s+1) + 1/(s+2) has DC gain 1.5
        let s1 = StateSpace::siso_from_tf(&[1.0], &[1.0, 1.0]).unwrap();
        let s2 = StateSpace::siso_from_tf(&[1.0], &[2.0, 1.0]).unwrap();
        let total = sum(&s1, &s2).unwrap();
        assert_eq!(total.order(), 2);
        assert!((total.dc_gain().unwrap()[(0, 0)] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn static_positive_feedback_shifts_the_pole() {
        // 1/(s+1) under positive feedback 0.5 has closed-loop pole -0.5 and
        // w1 -> y1 response 1/(s+0.5)
        let plant = StateSpace::siso_from_tf(&[1.0], &[1.0, 1.0]).unwrap();
        let gain = StateSpace::static_gain(Mat::scalar(0.5));
        let cl = positive_feedback(&plant, &gain).unwrap();
        let poles = cl.poles().unwrap();
        assert_eq!(poles.len(), 1);
        assert!((poles[0] - Complex64::new(-0.5, 0.0)).norm() < 1e-12);
        let s = Complex64::new(0.2, 0.4);
        let want = 1.0 / (s + 0.5);
        let got = cl.transfer_at(s).unwrap().at(0, 0);
        assert!((want - got).norm() < 1e-12);
    }

    #[test]
    fn destabilizing_static_feedback_moves_pole_right() {
        // 1/(s+1) with gain 2: closed-loop pole at +1
        let plant = StateSpace::siso_from_tf(&[1.0], &[1.0, 1.0]).unwrap();
        let gain = StateSpace::static_gain(Mat::scalar(2.0));
        let cl = positive_feedback(&plant, &gain).unwrap();
        assert!((cl.poles().unwrap()[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn dynamic_feedback_characteristic_polynomial() {
        // 1/(s^2+s+1) against 0.5/(s+1): closed loop det is
        // (s^2+s+1)(s+1) - 0.5 = s^3 + 2s^2 + 2s + 0.5
        let plant = StateSpace::siso_from_tf(&[1.0], &[1.0, 1.0, 1.0]).unwrap();
        let ctrl = StateSpace::siso_from_tf(&[0.5], &[1.0, 1.0]).unwrap();
        let cl = positive_feedback(&plant, &ctrl).unwrap();
        let poles = cl.poles().unwrap();
        // all roots of s^3+2s^2+2s+0.5 have negative real part
        assert_eq!(poles.len(), 3);
        for p in &poles {
            assert!(p.re < 0.0, "pole {p} not in the left half plane");
        }
        let prod: Complex64 = poles.iter().product();
        assert!((prod.re + 0.5).abs() < 1e-9, "product of poles should be -0.5");
    }

    #[test]
    fn algebraic_loop_is_rejected() {
        let g1 = StateSpace::static_gain(Mat::scalar(1.0));
        let g2 = StateSpace::static_gain(Mat::scalar(1.0));
        assert!(matches!(
            positive_feedback(&g1, &g2),
            Err(LtiError::IllPosedLoop { .. })
        ));
    }

    #[test]
    fn times_s_realization_of_first_order_lag() {
        // s * 1/(s+1) = s/(s+1): realization (-1, 1, -1, 1)
        let sys = StateSpace::siso_from_tf(&[1.0], &[1.0, 1.0]).unwrap();
        let f = ni_to_pr(&sys).unwrap();
        let s = Complex64::new(0.1, 2.0);
        let want = s / (s + 1.0);
        let got = f.transfer_at(s).unwrap().at(0, 0);
        assert!((want - got).norm() < 1e-12);
        assert!((f.d()[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn times_s_requires_zero_feedthrough() {
        let sys = StateSpace::new(
            Mat::scalar(-1.0),
            Mat::scalar(1.0),
            Mat::scalar(1.0),
            Mat::scalar(0.5),
        )
        .unwrap();
        assert!(matches!(
            ni_to_pr(&sys),
            Err(LtiError::NonzeroFeedthrough(_))
        ));
    }
}
