//! One-call classification: run the grid sweep, corroborate it with the
//! strongest applicable algebraic test, and upgrade the verdict through
//! the strictness ladder. Disagreement between a certificate and the grid
//! is treated as an internal inconsistency and surfaced as an error, not
//! averaged away.

use super::{
    check_ni_lemma, check_ni_lmi, check_ssni, check_weak_sni, default_grid, hamiltonian_ni_test,
    siso_ni_test, sweep_ni, AnalysisError, AnalysisOptions, Evidence, NiProperty, NiVerdict,
};
use crate::lti::eig_resolution;
use crate::numerics::eigenvalues;
use crate::StateSpace;

fn inapplicable(e: &AnalysisError) -> bool {
    matches!(
        e,
        AnalysisError::NotMinimal(_)
            | AnalysisError::SingularA
            | AnalysisError::AsymmetricFeedthrough { .. }
            | AnalysisError::InputRankDeficient { .. }
            | AnalysisError::OutputRankDeficient { .. }
            | AnalysisError::NotObservable(_)
            | AnalysisError::NormalRankDeficient { .. }
            | AnalysisError::RepeatedImaginaryPole(_)
            | AnalysisError::NotHurwitz { .. }
            | AnalysisError::IndefiniteQ { .. }
            | AnalysisError::SisoOnly { .. }
            | AnalysisError::CbNotPositive(_)
            | AnalysisError::AssumptionViolated(_)
    )
}

fn attempt<F>(f: F) -> Result<Option<NiVerdict>, AnalysisError>
where
    F: FnOnce() -> Result<NiVerdict, AnalysisError>,
{
    match f() {
        Ok(v) => Ok(Some(v)),
        Err(e) if inapplicable(&e) => Ok(None),
        Err(e) => Err(e),
    }
}

/// A sweep rejection counts as hard evidence only when it rests on a
/// clearly negative grid sample; screening rejections (a pole in the wrong
/// place) say nothing about the frequency-domain sign.
fn sweep_has_negative_sample(sweep: &NiVerdict) -> bool {
    matches!(&sweep.evidence, Evidence::Witness(w) if w.min_eigenvalue < -1e-6)
}

fn reconcile(alg: NiVerdict, sweep: &NiVerdict) -> Result<NiVerdict, AnalysisError> {
    let alg_holds = alg.established();
    let sweep_holds = sweep.established();
    if alg_holds && !sweep_holds {
        if sweep_has_negative_sample(sweep) {
            let w = sweep.evidence.witness().unwrap();
            return Err(AnalysisError::Conflict(format!(
                "{:?} produced a certificate but the grid found min eigenvalue {:.3e} at w = {:.6}",
                alg.method, w.min_eigenvalue, w.omega
            )));
        }
        let mut out = alg;
        out.caveats.extend(sweep.caveats.iter().cloned());
        return Ok(out);
    }
    if !alg_holds && sweep_holds {
        return Err(AnalysisError::Conflict(format!(
            "the grid stayed nonnegative everywhere but {:?} found no certificate: {}",
            alg.method,
            alg.caveats.join("; ")
        )));
    }
    if alg_holds {
        let mut out = alg;
        out.caveats.extend(sweep.caveats.iter().cloned());
        return Ok(out);
    }
    // both negative: prefer the rejection that carries a frequency witness
    if sweep.evidence.witness().is_some() && alg.evidence.witness().is_none() {
        let mut out = sweep.clone();
        out.caveats.extend(alg.caveats.iter().cloned());
        Ok(out)
    } else {
        let mut out = alg;
        out.caveats.extend(sweep.caveats.iter().cloned());
        Ok(out)
    }
}

/// Decide the strongest certifiable property of the system.
///
/// The grid sweep always runs. On top of it the strongest applicable
/// algebraic test is consulted: the Y-form for invertible A, the P-form
/// when the realization carries an origin pole, then the eigenvalue and
/// scalar tests as fallbacks when the LMI preconditions fail. A plain
/// negative imaginary verdict is upgraded through the strict and strongly
/// strict tests when those apply.
pub fn classify(sys: &StateSpace, opts: &AnalysisOptions) -> Result<NiVerdict, AnalysisError> {
    let grid = default_grid(sys, opts);
    let sweep = sweep_ni(sys, &grid, opts)?;

    let d_asym = sys.d().asymmetry_norm();
    if d_asym > 1e-8 * (1.0 + sys.d().frobenius_norm()) {
        let mut out = sweep;
        out.property = NiProperty::None;
        out.caveats.push(format!(
            "feedthrough is not symmetric (asymmetry {d_asym:.3e}); no algebraic test applies"
        ));
        return Ok(out);
    }

    let res = eig_resolution(sys.a().frobenius_norm());
    let origin_pole = sys.order() > 0
        && eigenvalues(sys.a())?.iter().any(|l| l.norm() <= res);

    let lemma = if origin_pole {
        attempt(|| check_ni_lmi(sys, opts))?
    } else {
        attempt(|| check_ni_lemma(sys, opts))?
    };

    if let Some(v) = lemma {
        let mut base = reconcile(v, &sweep)?;
        if base.established() && !origin_pole {
            if let Some(weak) = attempt(|| check_weak_sni(sys, opts))? {
                if weak.property == NiProperty::Sni {
                    base = weak;
                    if let Some(strong) = attempt(|| check_ssni(sys, opts))? {
                        if strong.property == NiProperty::Ssni {
                            base = strong;
                        }
                    }
                }
            }
        }
        return Ok(base);
    }

    if let Some(v) = attempt(|| hamiltonian_ni_test(sys, opts))? {
        return reconcile(v, &sweep);
    }
    if let Some(v) = attempt(|| siso_ni_test(sys, opts))? {
        return reconcile(v, &sweep);
    }

    let mut out = sweep;
    out.caveats
        .push("every algebraic test was inapplicable; grid evidence only".into());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lag() -> StateSpace {
        StateSpace::siso_from_tf(&[1.0], &[1.0, 1.0]).unwrap()
    }
    use crate::analysis::Method;
    use crate::modal::{random_structure, ModalModel, Mode};
    use crate::numerics::Mat;

    #[test]
    fn lag_climbs_the_whole_ladder() {
        let opts = AnalysisOptions::default();
        let v = classify(&lag(), &opts).unwrap();
        assert_eq!(v.property, NiProperty::Ssni, "caveats {:?}", v.caveats);
        assert_eq!(v.method, Method::SsniLemma);
    }

    #[test]
    fn integrator_takes_the_origin_route() {
        let sys = StateSpace::siso_from_tf(&[1.0], &[0.0, 1.0]).unwrap();
        let opts = AnalysisOptions::default();
        let v = classify(&sys, &opts).unwrap();
        assert_eq!(v.property, NiProperty::Ni, "caveats {:?}", v.caveats);
        assert_eq!(v.method, Method::NiLmi);
        assert!(v.caveats.iter().any(|c| c.contains("origin")));
    }

    #[test]
    fn damped_modal_model_stops_at_strict() {
        let sys = random_structure(5, 2, 1).realize();
        let opts = AnalysisOptions::default();
        let v = classify(&sys, &opts).unwrap();
        assert_eq!(v.property, NiProperty::Sni, "caveats {:?}", v.caveats);
        assert_eq!(v.method, Method::WeakSni);
    }

    #[test]
    fn undamped_resonance_stays_plain() {
        let sys = StateSpace::siso_from_tf(&[1.0], &[1.0, 0.0, 1.0]).unwrap();
        let opts = AnalysisOptions::default();
        let v = classify(&sys, &opts).unwrap();
        assert_eq!(v.property, NiProperty::Ni, "caveats {:?}", v.caveats);
        assert_eq!(v.method, Method::NiLemma);
    }

    #[test]
    fn flipped_mode_is_rejected_with_a_grid_witness() {
        let base = ModalModel::new(vec![Mode {
            omega: 2.0,
            kappa: 0.5,
            psi: vec![1.0],
        }])
        .unwrap()
        .realize();
        let sys = StateSpace::new(
            base.a().clone(),
            base.b().clone(),
            base.c().scale(-1.0),
            base.d().clone(),
        )
        .unwrap();
        let opts = AnalysisOptions::default();
        let v = classify(&sys, &opts).unwrap();
        assert_eq!(v.property, NiProperty::None);
        let w = v.evidence.witness().expect("grid witness");
        assert!(w.min_eigenvalue < -0.1, "witness {w:?}");
    }

    #[test]
    fn static_symmetric_gain_is_plain_ni() {
        let sys = StateSpace::static_gain(Mat::from_rows(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let opts = AnalysisOptions::default();
        let v = classify(&sys, &opts).unwrap();
        assert_eq!(v.property, NiProperty::Ni, "caveats {:?}", v.caveats);
    }

    #[test]
    fn redundant_realization_falls_back_to_the_eigenvalue_test() {
        // two copies of the same lag state: not minimal, so the Y-form is
        // inapplicable, but the eigenvalue test has no minimality gate
        let sys = StateSpace::new(
            Mat::diag(&[-1.0, -1.0]),
            Mat::column(&[1.0, 1.0]),
            Mat::row(&[0.5, 0.5]),
            Mat::scalar(0.0),
        )
        .unwrap();
        let opts = AnalysisOptions::default();
        let v = classify(&sys, &opts).unwrap();
        assert_eq!(v.property, NiProperty::Ni, "caveats {:?}", v.caveats);
        assert_eq!(v.method, Method::Hamiltonian);
    }

    #[test]
    fn asymmetric_feedthrough_short_circuits() {
        let sys = StateSpace::static_gain(Mat::from_rows(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        let opts = AnalysisOptions::default();
        let v = classify(&sys, &opts).unwrap();
        assert_eq!(v.property, NiProperty::None);
        assert!(v.caveats.iter().any(|c| c.contains("symmetric")));
    }
}
