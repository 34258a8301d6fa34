//! Stability of positive-feedback interconnections between negative
//! imaginary systems.
//!
//! Two tests are offered: the DC-gain test (necessary and sufficient when
//! the plant is NI, the controller SNI, and the feedthrough products
//! vanish) and a sufficient-only test for plants with a simple pole at the
//! origin. Both always attach the closed-loop spectral abscissa, and the
//! DC test treats a disagreement between the gain condition and the
//! eigenvalues as a bug, not as something to paper over.

use num_complex::Complex64;
use serde::Serialize;

use crate::analysis::{
    check_ni_lmi, classify, AnalysisError, AnalysisOptions, NiProperty, NiVerdict,
};
use crate::lti::{internal_stability, positive_feedback, StateSpace};
use crate::numerics::{definiteness, eigenvalues, rank};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityVerdict {
    Stable,
    Unstable,
    /// a hypothesis failed or the test is one-sided and inconclusive;
    /// never a claim of instability
    HypothesesUnmet,
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

impl HypothesisCheck {
    fn new(name: &str, holds: bool, detail: String) -> Self {
        HypothesisCheck {
            name: name.to_string(),
            holds,
            detail,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub stable: StabilityVerdict,
    /// spectrum of R(0) Rs(0), when both DC gains exist
    pub dc_eigenvalues: Vec<Complex64>,
    pub hypothesis_checks: Vec<HypothesisCheck>,
    /// spectral abscissa of the closed-loop state matrix
    pub eigenvalue_confirmation: Option<f64>,
    pub caveats: Vec<String>,
}

impl StabilityReport {
    /// largest real part among the DC loop eigenvalues
    pub fn max_dc_eigenvalue(&self) -> Option<f64> {
        self.dc_eigenvalues
            .iter()
            .map(|l| l.re)
            .fold(None, |acc: Option<f64>, v| {
                Some(acc.map_or(v, |a| a.max(v)))
            })
    }

    pub fn hypothesis(&self, name: &str) -> Option<&HypothesisCheck> {
        self.hypothesis_checks.iter().find(|c| c.name == name)
    }

    pub fn hypotheses_hold(&self) -> bool {
        self.hypothesis_checks.iter().all(|c| c.holds)
    }
}

/// Run a classification and fold the outcome into a named hypothesis check.
/// Errors from inapplicable tests count as a failed hypothesis, not as a
/// failure of this report.
fn classification_check(
    name: &str,
    sys: &StateSpace,
    want: NiProperty,
    opts: &AnalysisOptions,
) -> (HypothesisCheck, Option<NiVerdict>) {
    match classify(sys, opts) {
        Ok(v) => {
            let holds = v.property.at_least(&want);
            let detail = if holds {
                format!("established {:?} via {:?}", v.property, v.method)
            } else {
                format!(
                    "classified {:?} via {:?}; caveats: {}",
                    v.property,
                    v.method,
                    v.caveats.join("; ")
                )
            };
            (HypothesisCheck::new(name, holds, detail), Some(v))
        }
        Err(e) => (HypothesisCheck::new(name, false, e.to_string()), None),
    }
}

/// DC-gain stability test for the positive feedback loop of an NI plant
/// with an SNI controller: with R(inf) Rs(inf) = 0 and Rs(inf) >= 0, the
/// loop is internally stable exactly when the largest eigenvalue of
/// R(0) Rs(0) is below one. The eigenvalue route is always computed as a
/// cross check; outside a 5 percent band around the boundary the two
/// answers must agree or the call fails loudly.
pub fn dc_gain_stability(
    plant: &StateSpace,
    controller: &StateSpace,
    opts: &AnalysisOptions,
) -> Result<StabilityReport, AnalysisError> {
    let mut checks = Vec::new();
    let mut caveats = Vec::new();

    let (plant_check, _) = classification_check("plant NI", plant, NiProperty::Ni, opts);
    checks.push(plant_check);
    let (ctrl_check, _) = classification_check("controller SNI", controller, NiProperty::Sni, opts);
    checks.push(ctrl_check);

    let d_prod = plant.d() * controller.d();
    let d_scale = 1.0 + plant.d().frobenius_norm() * controller.d().frobenius_norm();
    let prod_zero = d_prod.max_abs() <= 1e-10 * d_scale;
    checks.push(HypothesisCheck::new(
        "R(inf) Rs(inf) = 0",
        prod_zero,
        format!("feedthrough product norm {:.3e}", d_prod.max_abs()),
    ));
    let ds = controller.d();
    let ds_rep = definiteness(&ds.symmetrize(), 1e-9 * (1.0 + ds.frobenius_norm()))?;
    checks.push(HypothesisCheck::new(
        "Rs(inf) >= 0",
        ds_rep.is_psd(),
        format!("smallest eigenvalue {:.3e}", ds_rep.min_eig),
    ));

    let closed = positive_feedback(plant, controller)?;
    let stab = internal_stability(&closed)?;

    let dc = match (plant.dc_gain(), controller.dc_gain()) {
        (Ok(r0), Ok(rs0)) => Some(&r0 * &rs0),
        (r, rs) => {
            let mut msg = Vec::new();
            if let Err(e) = r {
                msg.push(format!("plant: {e}"));
            }
            if let Err(e) = rs {
                msg.push(format!("controller: {e}"));
            }
            checks.push(HypothesisCheck::new(
                "DC gains exist",
                false,
                msg.join("; "),
            ));
            None
        }
    };
    let dc_eigenvalues = match &dc {
        Some(p) => eigenvalues(p)?,
        None => Vec::new(),
    };
    if let Some(p) = &dc {
        let scale = 1.0 + p.frobenius_norm();
        if dc_eigenvalues.iter().any(|l| l.im.abs() > 1e-8 * scale) {
            caveats.push(
                "eigenvalues of R(0) Rs(0) are not numerically real; the largest real part \
                 was used"
                    .into(),
            );
        }
    }

    let mut report = StabilityReport {
        stable: StabilityVerdict::HypothesesUnmet,
        dc_eigenvalues,
        hypothesis_checks: checks,
        eigenvalue_confirmation: Some(stab.abscissa),
        caveats,
    };
    if !report.hypotheses_hold() {
        return Ok(report);
    }

    let lam_max = report
        .max_dc_eigenvalue()
        .expect("hypotheses hold, so both DC gains exist");
    if (lam_max - 1.0).abs() <= 0.05 {
        report.caveats.push(format!(
            "DC loop gain {lam_max:.6} is marginal (within 5 percent of 1); the verdict \
             comes from the closed-loop eigenvalues"
        ));
        report.stable = if stab.stable {
            StabilityVerdict::Stable
        } else {
            StabilityVerdict::Unstable
        };
        return Ok(report);
    }

    let dc_stable = lam_max < 1.0;
    if dc_stable != stab.stable {
        return Err(AnalysisError::Conflict(format!(
            "the DC gain test ({lam_max:.6} vs 1) and the closed-loop spectral abscissa \
             ({:.3e}) disagree on a non-marginal problem",
            stab.abscissa
        )));
    }
    report.stable = if dc_stable {
        StabilityVerdict::Stable
    } else {
        StabilityVerdict::Unstable
    };
    Ok(report)
}

/// Sufficient stability test for a strictly proper NI plant that may carry
/// a simple pole at the origin: with an SNI controller whose DC gain is
/// negative definite, nonsingularity of A + B Rs(0) C settles stability.
/// When a hypothesis fails the verdict is "hypotheses unmet", never
/// "unstable"; the closed-loop abscissa is attached so the caller can
/// still decide.
pub fn origin_pole_stability(
    plant: &StateSpace,
    controller: &StateSpace,
    opts: &AnalysisOptions,
) -> Result<StabilityReport, AnalysisError> {
    let mut checks = Vec::new();
    let caveats = vec![
        "the negativity hypothesis on the controller is read at DC: Rs(0) negative definite \
         as a symmetric matrix"
            .to_string(),
    ];

    let d_norm = plant.d().max_abs();
    checks.push(HypothesisCheck::new(
        "plant strictly proper",
        d_norm <= 1e-12 * (1.0 + plant.d().frobenius_norm()),
        format!("feedthrough norm {d_norm:.3e}"),
    ));

    // the origin-tolerant LMI route is the right notion of NI here
    match check_ni_lmi(plant, opts) {
        Ok(v) if v.established() => checks.push(HypothesisCheck::new(
            "plant NI (origin pole permitted)",
            true,
            format!("established {:?} via {:?}", v.property, v.method),
        )),
        Ok(v) => checks.push(HypothesisCheck::new(
            "plant NI (origin pole permitted)",
            false,
            format!("not established; caveats: {}", v.caveats.join("; ")),
        )),
        Err(e) => checks.push(HypothesisCheck::new(
            "plant NI (origin pole permitted)",
            false,
            e.to_string(),
        )),
    }

    let (ctrl_check, _) = classification_check("controller SNI", controller, NiProperty::Sni, opts);
    checks.push(ctrl_check);

    match controller.dc_gain() {
        Ok(rs0) => {
            let rep = definiteness(&rs0.symmetrize(), 1e-9 * (1.0 + rs0.frobenius_norm()))?;
            let sym = rs0.asymmetry_norm() <= 1e-8 * (1.0 + rs0.frobenius_norm());
            checks.push(HypothesisCheck::new(
                "Rs(0) negative definite",
                rep.is_nd() && sym,
                format!(
                    "largest eigenvalue {:.3e}, asymmetry {:.3e}",
                    rep.max_eig,
                    rs0.asymmetry_norm()
                ),
            ));
            let gate = plant.a() + &(&(plant.b() * &rs0) * plant.c());
            let r = rank(&gate)?;
            checks.push(HypothesisCheck::new(
                "A + B Rs(0) C nonsingular",
                r == plant.order(),
                format!("numerical rank {r} of {}", plant.order()),
            ));
        }
        Err(e) => {
            checks.push(HypothesisCheck::new(
                "Rs(0) negative definite",
                false,
                format!("controller DC gain unavailable: {e}"),
            ));
        }
    }

    let closed = positive_feedback(plant, controller)?;
    let stab = internal_stability(&closed)?;

    let dc_eigenvalues = match (plant.dc_gain(), controller.dc_gain()) {
        (Ok(r0), Ok(rs0)) => eigenvalues(&(&r0 * &rs0))?,
        _ => Vec::new(),
    };

    let report = StabilityReport {
        stable: StabilityVerdict::HypothesesUnmet,
        dc_eigenvalues,
        hypothesis_checks: checks,
        eigenvalue_confirmation: Some(stab.abscissa),
        caveats,
    };
    if report.hypotheses_hold() {
        if !stab.stable {
            return Err(AnalysisError::Conflict(format!(
                "every hypothesis of the origin-pole test holds, yet the closed-loop \
                 spectral abscissa is {:.3e}",
                stab.abscissa
            )));
        }
        let mut report = report;
        report.stable = StabilityVerdict::Stable;
        return Ok(report);
    }
    let mut report = report;
    report
        .caveats
        .push("the test is one-sided; an unmet hypothesis leaves stability undecided here".into());
    Ok(report)
}

/// Closed-loop negative imaginaryness: for two NI systems in an internally
/// stable positive feedback loop, the 2m by 2m map from the loop inputs to
/// the outputs is NI again, and strictly so when either side is SNI. The
/// verdict comes from re-classifying the assembled loop; evidence against
/// the property is a hard failure because it contradicts the closure
/// property this function exists to exercise.
pub fn closed_loop_ni(
    plant: &StateSpace,
    controller: &StateSpace,
    opts: &AnalysisOptions,
) -> Result<NiVerdict, AnalysisError> {
    let pv = classify(plant, opts)?;
    if !pv.property.at_least(&NiProperty::Ni) {
        return Err(AnalysisError::AssumptionViolated(format!(
            "plant was not established negative imaginary (got {:?}; caveats: {})",
            pv.property,
            pv.caveats.join("; ")
        )));
    }
    let cv = classify(controller, opts)?;
    if !cv.property.at_least(&NiProperty::Ni) {
        return Err(AnalysisError::AssumptionViolated(format!(
            "controller was not established negative imaginary (got {:?}; caveats: {})",
            cv.property,
            cv.caveats.join("; ")
        )));
    }
    let strict_expected = pv.property.at_least(&NiProperty::Sni)
        || cv.property.at_least(&NiProperty::Sni);

    let closed = positive_feedback(plant, controller)?;
    let stab = internal_stability(&closed)?;
    if !stab.stable {
        return Err(AnalysisError::AssumptionViolated(format!(
            "the positive-feedback interconnection is not internally stable \
             (spectral abscissa {:.3e}); the closure result does not apply",
            stab.abscissa
        )));
    }

    let mut verdict = classify(&closed, opts)?;
    if !verdict.property.at_least(&NiProperty::Ni) {
        return Err(AnalysisError::Conflict(format!(
            "both loop members are NI and the loop is stable, yet the closed-loop matrix \
             classified {:?} (caveats: {})",
            verdict.property,
            verdict.caveats.join("; ")
        )));
    }
    if strict_expected && !verdict.property.at_least(&NiProperty::Sni) {
        verdict.caveats.push(
            "one loop member is SNI, so the closed loop is strictly negative imaginary in \
             theory; the strict certificate was not obtained numerically"
                .into(),
        );
    }
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Mat;

    fn second_order_plant() -> StateSpace {
        StateSpace::siso_from_tf(&[1.0], &[1.0, 1.0, 1.0]).unwrap()
    }

    fn lag_scaled(k: f64) -> StateSpace {
        StateSpace::siso_from_tf(&[k], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn dc_product_below_one_is_stable() {
        let opts = AnalysisOptions::default();
        let rep = dc_gain_stability(&second_order_plant(), &lag_scaled(0.5), &opts).unwrap();
        assert_eq!(rep.stable, StabilityVerdict::Stable, "report {rep:?}");
        assert!((rep.max_dc_eigenvalue().unwrap() - 0.5).abs() < 1e-12);
        assert!(rep.eigenvalue_confirmation.unwrap() < 0.0);
    }

    #[test]
    fn dc_product_two_is_unstable_with_matching_eigenvalues() {
        let opts = AnalysisOptions::default();
        let rep = dc_gain_stability(&second_order_plant(), &lag_scaled(2.0), &opts).unwrap();
        assert_eq!(rep.stable, StabilityVerdict::Unstable);
        assert!(rep.eigenvalue_confirmation.unwrap() > 0.0);
    }

    #[test]
    fn marginal_product_defers_to_the_eigenvalues() {
        // product exactly 1: the characteristic polynomial picks up a root
        // at the origin, so the eigenvalue route reports unstable
        let opts = AnalysisOptions::default();
        let rep = dc_gain_stability(&second_order_plant(), &lag_scaled(1.0), &opts).unwrap();
        assert_eq!(rep.stable, StabilityVerdict::Unstable);
        assert!(rep.caveats.iter().any(|c| c.contains("marginal")));
    }

    #[test]
    fn non_strict_controller_fails_the_hypotheses() {
        let undamped = StateSpace::siso_from_tf(&[1.0], &[1.0, 0.0, 1.0]).unwrap();
        let opts = AnalysisOptions::default();
        let rep = dc_gain_stability(&second_order_plant(), &undamped, &opts).unwrap();
        assert_eq!(rep.stable, StabilityVerdict::HypothesesUnmet);
        let ctrl = rep.hypothesis("controller SNI").unwrap();
        assert!(!ctrl.holds);
    }

    fn integrator() -> StateSpace {
        StateSpace::siso_from_tf(&[1.0], &[0.0, 1.0]).unwrap()
    }

    /// -2 + 1/(s+1): SNI with DC gain -1 and negative feedthrough
    fn offset_lag() -> StateSpace {
        StateSpace::new(
            Mat::scalar(-1.0),
            Mat::scalar(1.0),
            Mat::scalar(1.0),
            Mat::scalar(-2.0),
        )
        .unwrap()
    }

    #[test]
    fn origin_pole_sufficient_condition_applies() {
        let opts = AnalysisOptions::default();
        let rep = origin_pole_stability(&integrator(), &offset_lag(), &opts).unwrap();
        assert_eq!(rep.stable, StabilityVerdict::Stable, "report {rep:?}");
        // closed loop characteristic polynomial s^2 + 3 s + 1 is Hurwitz
        assert!(rep.eigenvalue_confirmation.unwrap() < 0.0);
    }

    #[test]
    fn positive_dc_controller_leaves_the_test_inconclusive() {
        let opts = AnalysisOptions::default();
        let rep = origin_pole_stability(&integrator(), &lag_scaled(0.5), &opts).unwrap();
        assert_eq!(rep.stable, StabilityVerdict::HypothesesUnmet);
        let gate = rep.hypothesis("Rs(0) negative definite").unwrap();
        assert!(!gate.holds);
        // the loop really is unstable, visible through the attached abscissa
        assert!(rep.eigenvalue_confirmation.unwrap() > 0.0);
    }

    #[test]
    fn singular_gate_matrix_is_reported() {
        // plant 1/(s-1) is not NI either, but the singularity check must
        // still evaluate: A + B (-1) C = 1 - 1 = 0
        let plant = StateSpace::new(
            Mat::scalar(1.0),
            Mat::scalar(1.0),
            Mat::scalar(1.0),
            Mat::scalar(0.0),
        )
        .unwrap();
        let opts = AnalysisOptions::default();
        let rep = origin_pole_stability(&plant, &offset_lag(), &opts).unwrap();
        assert_eq!(rep.stable, StabilityVerdict::HypothesesUnmet);
        let gate = rep.hypothesis("A + B Rs(0) C nonsingular").unwrap();
        assert!(!gate.holds, "gate {gate:?}");
    }

    #[test]
    fn stable_loop_of_ni_and_sni_is_ni_again() {
        let opts = AnalysisOptions::default();
        let v = closed_loop_ni(&second_order_plant(), &lag_scaled(0.5), &opts).unwrap();
        assert!(
            v.property.at_least(&NiProperty::Sni),
            "closed loop classified {:?} with caveats {:?}",
            v.property,
            v.caveats
        );
    }

    #[test]
    fn unstable_interconnection_is_refused() {
        let opts = AnalysisOptions::default();
        match closed_loop_ni(&second_order_plant(), &lag_scaled(2.0), &opts) {
            Err(AnalysisError::AssumptionViolated(msg)) => {
                assert!(msg.contains("internally stable"), "message: {msg}")
            }
            other => panic!("expected the stability gate, got {other:?}"),
        }
    }

    #[test]
    fn zero_controller_keeps_the_plant_verdict() {
        let zero = StateSpace::static_gain(Mat::scalar(0.0));
        let opts = AnalysisOptions::default();
        let v = closed_loop_ni(&second_order_plant(), &zero, &opts).unwrap();
        assert!(v.property.at_least(&NiProperty::Ni));
    }
}
