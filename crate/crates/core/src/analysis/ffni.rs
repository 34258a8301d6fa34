//! Finite-bandwidth negative imaginary test.
//!
//! The property only constrains j[R(jw) - R(jw)*] on the band (0, w_bar),
//! so a system may fail the unrestricted test and still pass here. Two
//! dual LMI characterizations exist and both are solved; they must agree,
//! and a split decision is escalated as an internal inconsistency rather
//! than silently resolved either way.

use num_complex::Complex64;

use super::{
    require_minimal, require_square, require_symmetric_feedthrough, AnalysisError,
    AnalysisOptions, Certificate, Evidence, Method, NiProperty, NiVerdict,
};
use crate::lmi::{AffineExpr, LmiOutcome, LmiProblem, Sense};
use crate::lti::{eig_resolution, poles_and_residues, StateSpace};
use crate::numerics::{eigenvalues, hermitian_definiteness, inverse, sym_eig, Mat};

/// Decide whether j[R(jw) - R(jw)*] >= 0 holds for all w in (0, bandwidth).
///
/// Preconditions: square minimal realization, nonsingular A, symmetric
/// feedthrough, and simple imaginary poles inside the band. Two LMI
/// relaxations (one in Y with a slack X, one in P with a slack Q) are
/// solved independently; the verdict requires them to agree.
pub fn check_ffni(
    sys: &StateSpace,
    bandwidth: f64,
    opts: &AnalysisOptions,
) -> Result<NiVerdict, AnalysisError> {
    require_square(sys)?;
    require_minimal(sys)?;
    require_symmetric_feedthrough(sys)?;
    if !bandwidth.is_finite() || bandwidth <= 0.0 {
        return Err(AnalysisError::AssumptionViolated(format!(
            "bandwidth must be a positive finite frequency (got {bandwidth})"
        )));
    }
    let n = sys.order();
    let res = eig_resolution(sys.a().frobenius_norm());
    let eigs = eigenvalues(sys.a())?;
    if eigs.iter().any(|l| l.norm() <= res) {
        return Err(AnalysisError::SingularA);
    }
    if let Some(l) = eigs.iter().find(|l| l.re > res) {
        return Ok(NiVerdict::failure(
            Method::FfniLmi,
            format!("pole in the open right half-plane at {l:.6}"),
        ));
    }

    // in-band poles on the axis must be simple with nonnegative residue
    // matrices K = j Res, exactly as in the unrestricted definition
    let mut caveats = Vec::new();
    for info in poles_and_residues(sys)? {
        if !info.on_imaginary_axis || info.location.im <= 0.0 {
            continue;
        }
        if info.location.im > bandwidth * (1.0 + 1e-9) {
            continue;
        }
        if info.multiplicity > 1 {
            return Err(AnalysisError::RepeatedImaginaryPole(info.location));
        }
        let residue = info.residue.as_ref().expect("simple axis pole has residue");
        let k0 = residue.scale(Complex64::new(0.0, 1.0));
        let scale = 1.0 + k0.max_abs();
        if k0.hermitian_asymmetry() > 1e-7 * scale {
            caveats.push(format!(
                "residue matrix at {:.6} is not Hermitian; the pole is not negative imaginary",
                info.location
            ));
            return Ok(NiVerdict {
                property: NiProperty::None,
                method: Method::FfniLmi,
                evidence: Evidence::None,
                caveats,
            });
        }
        let rep = hermitian_definiteness(&k0, opts.psd_tol * scale)?;
        if !rep.is_psd() {
            caveats.push(format!(
                "residue matrix at {:.6} has a negative eigenvalue ({:.3e})",
                info.location, rep.min_eig
            ));
            return Ok(NiVerdict {
                property: NiProperty::None,
                method: Method::FfniLmi,
                evidence: Evidence::None,
                caveats,
            });
        }
    }

    let ident = Mat::identity(n);
    let w2 = bandwidth * bandwidth;
    let ainv = inverse(sys.a())?;
    let aib = &ainv * sys.b();

    // slack form in Y: B + AYC' = 0, CX = 0, X >= 0,
    //   AY + YA' - AXA' + w_bar^2 X <= 0 (Y unconstrained in sign)
    let mut primal = LmiProblem::new();
    let y = primal.add_symmetric("Y", n);
    let x = primal.add_symmetric("X", n);
    let mut coupling = AffineExpr::constant(sys.b().clone());
    coupling.push_term(primal.vars(), y, sys.a().clone(), sys.c().transpose(), false)?;
    primal.require_zero(coupling);
    let mut cx = AffineExpr::zero(sys.outputs(), n);
    cx.push_term(primal.vars(), x, sys.c().clone(), ident.clone(), false)?;
    primal.require_zero(cx);
    let mut cone_p = AffineExpr::zero(n, n);
    cone_p.push_term(primal.vars(), y, sys.a().clone(), ident.clone(), false)?;
    cone_p.push_term(primal.vars(), y, ident.clone(), sys.a().transpose(), false)?;
    cone_p.push_term(primal.vars(), x, sys.a().scale(-1.0), sys.a().transpose(), false)?;
    cone_p.push_term(primal.vars(), x, ident.scale(w2), ident.clone(), false)?;
    primal.require(cone_p, Sense::Nsd);
    let mut x_psd = AffineExpr::zero(n, n);
    x_psd.push_term(primal.vars(), x, ident.clone(), ident.clone(), false)?;
    primal.require(x_psd, Sense::Psd);
    let primal_outcome = primal.solve(&opts.solver)?;

    // slack form in P: C + B'A^{-T}P = 0, Q A^{-1} B = 0, Q >= 0,
    //   PA + A'P - A'QA + w_bar^2 Q <= 0 (P unconstrained in sign)
    let mut dual = LmiProblem::new();
    let p = dual.add_symmetric("P", n);
    let q = dual.add_symmetric("Q", n);
    let mut dcoupling = AffineExpr::constant(sys.c().clone());
    dcoupling.push_term(dual.vars(), p, aib.transpose(), ident.clone(), false)?;
    dual.require_zero(dcoupling);
    let mut qaib = AffineExpr::zero(n, sys.inputs());
    qaib.push_term(dual.vars(), q, ident.clone(), aib.clone(), false)?;
    dual.require_zero(qaib);
    let mut cone_d = AffineExpr::zero(n, n);
    cone_d.push_term(dual.vars(), p, ident.clone(), sys.a().clone(), false)?;
    cone_d.push_term(dual.vars(), p, sys.a().transpose(), ident.clone(), false)?;
    cone_d.push_term(dual.vars(), q, sys.a().transpose().scale(-1.0), sys.a().clone(), false)?;
    cone_d.push_term(dual.vars(), q, ident.scale(w2), ident.clone(), false)?;
    dual.require(cone_d, Sense::Nsd);
    let mut q_psd = AffineExpr::zero(n, n);
    q_psd.push_term(dual.vars(), q, ident.clone(), ident, false)?;
    dual.require(q_psd, Sense::Psd);
    let dual_outcome = dual.solve(&opts.solver)?;

    match (primal_outcome, dual_outcome) {
        (LmiOutcome::Feasible(ps), LmiOutcome::Feasible(ds)) => {
            let yv = ps.values[y.0].clone();
            let xv = ps.values[x.0].clone();
            let pv = ds.values[p.0].clone();
            let qv = ds.values[q.0].clone();
            let mut cert = Certificate::default();
            cert.push_residual(
                "coupling",
                (sys.b() + &(&(sys.a() * &yv) * &sys.c().transpose())).frobenius_norm(),
            );
            cert.push_residual("cx", (sys.c() * &xv).frobenius_norm());
            cert.push_residual(
                "dual_coupling",
                (sys.c() + &(&aib.transpose() * &pv)).frobenius_norm(),
            );
            cert.push_residual("q_kernel", (&qv * &aib).frobenius_norm());
            let sp = &(&(sys.a() * &yv) + &(&yv * &sys.a().transpose()))
                - &(&(&(sys.a() * &xv) * &sys.a().transpose()) - &xv.scale(w2));
            let sd = &(&(&pv * sys.a()) + &(&sys.a().transpose() * &pv))
                - &(&(&(&sys.a().transpose() * &qv) * sys.a()) - &qv.scale(w2));
            cert.push_margin(
                "band_lmi_max_eig",
                *sym_eig(&sp.symmetrize())?.values.last().unwrap_or(&0.0),
            );
            cert.push_margin(
                "dual_band_lmi_max_eig",
                *sym_eig(&sd.symmetrize())?.values.last().unwrap_or(&0.0),
            );
            cert.push_margin(
                "x_min_eig",
                *sym_eig(&xv)?.values.first().unwrap_or(&0.0),
            );
            cert.push_margin(
                "q_min_eig",
                *sym_eig(&qv)?.values.first().unwrap_or(&0.0),
            );
            cert.push_matrix("Y", yv);
            cert.push_matrix("X", xv);
            cert.push_matrix("P", pv);
            cert.push_matrix("Q", qv);
            Ok(NiVerdict {
                property: NiProperty::Ffni { bandwidth },
                method: Method::FfniLmi,
                evidence: Evidence::Certificate(cert),
                caveats,
            })
        }
        (LmiOutcome::Infeasible(pr), LmiOutcome::Infeasible(dr)) => {
            caveats.push(format!(
                "no band-limited certificate: slack-Y search ended with gap {:.2e} after {} \
                 iterations, slack-P search with gap {:.2e} after {}",
                pr.best_gap, pr.iterations, dr.best_gap, dr.iterations
            ));
            Ok(NiVerdict {
                property: NiProperty::None,
                method: Method::FfniLmi,
                evidence: Evidence::None,
                caveats,
            })
        }
        (LmiOutcome::Feasible(_), LmiOutcome::Infeasible(dr)) => {
            Err(AnalysisError::Conflict(format!(
                "slack-Y band test is feasible but the slack-P form is not \
                 (gap {:.2e} after {} iterations)",
                dr.best_gap, dr.iterations
            )))
        }
        (LmiOutcome::Infeasible(pr), LmiOutcome::Feasible(_)) => {
            Err(AnalysisError::Conflict(format!(
                "slack-P band test is feasible but the slack-Y form is not \
                 (gap {:.2e} after {} iterations)",
                pr.best_gap, pr.iterations
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lag() -> StateSpace {
        StateSpace::siso_from_tf(&[1.0], &[1.0, 1.0]).unwrap()
    }

    /// 6w/(1+w^2) - w/(1+0.04w^2) crosses zero near w = 2.565; below that
    /// the band property holds, above it fails
    fn band_example() -> StateSpace {
        StateSpace::new(
            Mat::diag(&[-1.0, -5.0]),
            Mat::column(&[1.0, 1.0]),
            Mat::row(&[3.0, -12.5]),
            Mat::scalar(0.0),
        )
        .unwrap()
    }

    #[test]
    fn band_example_holds_below_the_crossover() {
        let opts = AnalysisOptions::default();
        let v = check_ffni(&band_example(), 2.0, &opts).unwrap();
        assert_eq!(
            v.property,
            NiProperty::Ffni { bandwidth: 2.0 },
            "caveats {:?}",
            v.caveats
        );
        let cert = v.certificate().unwrap();
        assert!(cert.residual("coupling").unwrap() < 1e-6);
        assert!(cert.residual("dual_coupling").unwrap() < 1e-6);
    }

    #[test]
    fn band_example_fails_above_the_crossover() {
        let opts = AnalysisOptions::default();
        let v = check_ffni(&band_example(), 3.0, &opts).unwrap();
        assert_eq!(v.property, NiProperty::None, "caveats {:?}", v.caveats);
    }

    #[test]
    fn unrestricted_ni_system_passes_any_band() {
        let opts = AnalysisOptions::default();
        let v = check_ffni(&lag(), 10.0, &opts).unwrap();
        assert_eq!(
            v.property,
            NiProperty::Ffni { bandwidth: 10.0 },
            "caveats {:?}",
            v.caveats
        );
    }

    #[test]
    fn negative_residue_inside_the_band_is_fatal() {
        // -1/(s^2+1): pole at j inside the band with residue matrix -1/2
        let sys = StateSpace::siso_from_tf(&[-1.0], &[1.0, 0.0, 1.0]).unwrap();
        let opts = AnalysisOptions::default();
        let v = check_ffni(&sys, 2.0, &opts).unwrap();
        assert_eq!(v.property, NiProperty::None);
        assert!(v.caveats.iter().any(|c| c.contains("negative eigenvalue")));
    }

    #[test]
    fn bandwidth_must_be_positive() {
        let opts = AnalysisOptions::default();
        match check_ffni(&lag(), 0.0, &opts) {
            Err(AnalysisError::AssumptionViolated(_)) => {}
            other => panic!("expected a bandwidth gate, got {other:?}"),
        }
    }

    #[test]
    fn repeated_in_band_imaginary_pole_is_an_error() {
        // 1/(s^2+1)^2 has a double pole at j
        let sys = StateSpace::siso_from_tf(&[1.0], &[1.0, 0.0, 2.0, 0.0, 1.0]).unwrap();
        let opts = AnalysisOptions::default();
        match check_ffni(&sys, 2.0, &opts) {
            Err(AnalysisError::RepeatedImaginaryPole(_)) => {}
            other => panic!("expected a repeated-pole gate, got {other:?}"),
        }
    }
}
