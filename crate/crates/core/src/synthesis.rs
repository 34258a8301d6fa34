//! Static state feedback that renders a closed loop negative imaginary.
//!
//! Given x' = A x + B1 w + B2 u, z = C1 x, the goal is u = K x such that
//! the disturbance-to-performance map C1 (sI - A - B2 K)^{-1} B1 is NI
//! with DC gain strictly below the identity. Feasibility is an LMI in
//! (Y, M) with K = M Y^{-1}; the DC bound is what buys robustness against
//! any strictly negative imaginary uncertainty closing the w-z loop.

use serde::Serialize;
use thiserror::Error;

use crate::analysis::{
    check_ni_lemma, classify, sweep_ni, AnalysisError, AnalysisOptions, NiProperty,
};
use crate::lmi::{AffineExpr, LmiError, LmiOutcome, LmiProblem, Sense};
use crate::lti::{internal_stability, positive_feedback, LtiError, StateSpace};
use crate::numerics::{
    cond_1, definiteness, solve_linear, sym_eig, Mat, NumericsError,
};

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(
        "synthesis LMI infeasible down to epsilon = {epsilon:.3e} ({detail}); \
         a smaller decay margin may help, or no NI-enforcing state feedback exists"
    )]
    Infeasible { epsilon: f64, detail: String },
    #[error("recovered Y is numerically singular (1-norm condition {cond:.3e})")]
    IllConditioned { cond: f64 },
    #[error(
        "closed-loop validation failed: {0}; the certificate from the solver does not \
         survive re-checking, which points at a solver tolerance problem"
    )]
    ValidationFailed(String),
    #[error(
        "admissible uncertainty sample {index} destabilizes the loop (abscissa {abscissa:.3e}); \
         this contradicts the DC-gain guarantee"
    )]
    AuditFailed { index: usize, abscissa: f64 },
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Lmi(#[from] LmiError),
    #[error(transparent)]
    Lti(#[from] LtiError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Open-loop data: x' = A x + B1 w + B2 u, z = C1 x. The w-z channel is
/// square so that the closed loop can be NI.
#[derive(Clone, Debug, Serialize)]
pub struct UncertainPlant {
    pub a: Mat,
    pub b1: Mat,
    pub b2: Mat,
    pub c1: Mat,
}

impl UncertainPlant {
    pub fn new(a: Mat, b1: Mat, b2: Mat, c1: Mat) -> Result<Self, SynthesisError> {
        let n = a.rows();
        if !a.is_square() {
            return Err(SynthesisError::Dimension(format!(
                "A must be square, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        if b1.rows() != n || b2.rows() != n || c1.cols() != n {
            return Err(SynthesisError::Dimension(format!(
                "B1 ({}x{}), B2 ({}x{}) and C1 ({}x{}) must match A ({n}x{n})",
                b1.rows(),
                b1.cols(),
                b2.rows(),
                b2.cols(),
                c1.rows(),
                c1.cols()
            )));
        }
        if b1.cols() != c1.rows() {
            return Err(SynthesisError::Dimension(format!(
                "the w-z channel must be square: B1 has {} columns, C1 has {} rows",
                b1.cols(),
                c1.rows()
            )));
        }
        for (name, m) in [("A", &a), ("B1", &b1), ("B2", &b2), ("C1", &c1)] {
            m.check_finite()
                .map_err(|_| SynthesisError::Dimension(format!("{name} contains non-finite entries")))?;
        }
        Ok(UncertainPlant { a, b1, b2, c1 })
    }

    pub fn order(&self) -> usize {
        self.a.rows()
    }

    pub fn channel_dim(&self) -> usize {
        self.b1.cols()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SynthesisResult {
    pub k: Mat,
    pub y: Mat,
    pub m: Mat,
    /// decay margin actually used by the accepted solve
    pub epsilon: f64,
    /// C1 (sI - A - B2 K)^{-1} B1
    pub closed_loop: StateSpace,
    /// largest eigenvalue of the closed-loop Lyapunov form AclY + YAcl'
    pub lyapunov_max_eig: f64,
    /// largest eigenvalue of the closed-loop DC gain; below 1 by design
    pub dc_max_eig: f64,
    pub caveats: Vec<String>,
}

fn solve_once(
    plant: &UncertainPlant,
    epsilon: f64,
    opts: &AnalysisOptions,
) -> Result<Result<(Mat, Mat), String>, SynthesisError> {
    let n = plant.order();
    let mdim = plant.channel_dim();
    let p = plant.b2.cols();
    let ident = Mat::identity(n);

    let mut problem = LmiProblem::new();
    let y = problem.add_symmetric("Y", n);
    let mv = problem.add_rectangular("M", p, n);

    // B1 + A Y C1' + B2 M C1' = 0 pins the DC gain to C1 Y C1'
    let c1t = plant.c1.transpose();
    let mut coupling = AffineExpr::constant(plant.b1.clone());
    coupling.push_term(problem.vars(), y, plant.a.clone(), c1t.clone(), false)?;
    coupling.push_term(problem.vars(), mv, plant.b2.clone(), c1t.clone(), false)?;
    problem.require_zero(coupling);

    // (A + B2 K) Y + Y (A + B2 K)' <= -eps I in the (Y, M) variables
    let mut lyap = AffineExpr::zero(n, n);
    lyap.push_term(problem.vars(), y, plant.a.clone(), ident.clone(), false)?;
    lyap.push_term(problem.vars(), y, ident.clone(), plant.a.transpose(), false)?;
    lyap.push_term(problem.vars(), mv, plant.b2.clone(), ident.clone(), false)?;
    lyap.push_term(problem.vars(), mv, ident.clone(), plant.b2.transpose(), true)?;
    problem.require(lyap, Sense::NdMargin(epsilon));

    // DC gain strictly inside the identity
    let mut dc = AffineExpr::constant(Mat::identity(mdim));
    dc.push_term(problem.vars(), y, plant.c1.scale(-1.0), c1t, false)?;
    problem.require(dc, Sense::PdMargin(opts.solver.strict_margin));

    let mut y_pd = AffineExpr::zero(n, n);
    y_pd.push_term(problem.vars(), y, ident.clone(), ident, false)?;
    problem.require(y_pd, Sense::PdMargin(opts.solver.strict_margin));

    match problem.solve(&opts.solver)? {
        LmiOutcome::Feasible(sol) => Ok(Ok((sol.values[y.0].clone(), sol.values[mv.0].clone()))),
        LmiOutcome::Infeasible(report) => Ok(Err(format!(
            "best cone gap {:.2e} after {} iterations",
            report.best_gap, report.iterations
        ))),
    }
}

/// Find K = M Y^{-1} making the closed loop NI with decay margin epsilon.
/// With no margin given, a scale-aware default is tried and halved up to
/// ten times before giving up; the margin that succeeded is reported.
pub fn synth_state_feedback(
    plant: &UncertainPlant,
    epsilon: Option<f64>,
    opts: &AnalysisOptions,
) -> Result<SynthesisResult, SynthesisError> {
    let n = plant.order();
    if n == 0 {
        return Err(SynthesisError::Dimension("empty state space".into()));
    }
    let mut eps = match epsilon {
        Some(e) if e > 0.0 && e.is_finite() => e,
        Some(e) => {
            return Err(SynthesisError::Dimension(format!(
                "epsilon must be positive and finite, got {e}"
            )))
        }
        None => 1e-3 * (1.0 + plant.a.frobenius_norm()),
    };

    let mut last_detail = String::new();
    let mut solved = None;
    for _ in 0..10 {
        match solve_once(plant, eps, opts)? {
            Ok(pair) => {
                solved = Some(pair);
                break;
            }
            Err(detail) => {
                last_detail = detail;
                eps *= 0.5;
            }
        }
    }
    let (yv, mvv) = solved.ok_or(SynthesisError::Infeasible {
        epsilon: eps,
        detail: last_detail,
    })?;

    let cond = cond_1(&yv);
    if cond > 1e10 {
        return Err(SynthesisError::IllConditioned { cond });
    }
    // K Y = M, Y symmetric
    let k = solve_linear(&yv, &mvv.transpose())?.transpose();
    let k_resid = (&(&k * &yv) - &mvv).frobenius_norm();
    if k_resid > 1e-9 * (1.0 + mvv.frobenius_norm()) {
        return Err(SynthesisError::ValidationFailed(format!(
            "gain recovery residual {k_resid:.3e}"
        )));
    }

    let a_cl = &plant.a + &(&plant.b2 * &k);
    let closed = StateSpace::strictly_proper(a_cl.clone(), plant.b1.clone(), plant.c1.clone())?;
    let stab = internal_stability(&closed)?;
    if !stab.stable {
        return Err(SynthesisError::ValidationFailed(format!(
            "closed-loop spectral abscissa {:.3e}",
            stab.abscissa
        )));
    }

    let mut caveats = Vec::new();
    // independent re-check of the NI property on the assembled closed loop
    match check_ni_lemma(&closed, opts) {
        Ok(v) if v.property.at_least(&NiProperty::Ni) => {}
        Ok(v) => {
            return Err(SynthesisError::ValidationFailed(format!(
                "closed loop not certified NI (got {:?}; caveats: {})",
                v.property,
                v.caveats.join("; ")
            )))
        }
        Err(AnalysisError::NotMinimal(detail)) => {
            // fall back to the frequency sweep when pole-zero cancellation
            // makes the state-space certificate inapplicable
            let grid = crate::analysis::default_grid(&closed, opts);
            let v = sweep_ni(&closed, &grid, opts)?;
            if !v.property.at_least(&NiProperty::Ni) {
                return Err(SynthesisError::ValidationFailed(format!(
                    "closed loop failed the NI sweep after a non-minimal realization \
                     ({detail})"
                )));
            }
            caveats.push(format!(
                "closed-loop realization is not minimal ({detail}); NI verified by sweep"
            ));
        }
        Err(e) => return Err(e.into()),
    }

    // DC audit: the equality constraint makes G_cl(0) = C1 Y C1'
    let dc = closed.dc_gain()?;
    let dc_lmi = &(&plant.c1 * &yv) * &plant.c1.transpose();
    let spread = (&dc - &dc_lmi).frobenius_norm();
    if spread > 1e-6 * (1.0 + dc_lmi.frobenius_norm()) {
        return Err(SynthesisError::ValidationFailed(format!(
            "closed-loop DC gain differs from C1 Y C1' by {spread:.3e}"
        )));
    }
    let dc_eig = sym_eig(&dc.symmetrize())?;
    let dc_max_eig = *dc_eig.values.last().unwrap_or(&0.0);
    if dc_max_eig >= 1.0 {
        return Err(SynthesisError::ValidationFailed(format!(
            "closed-loop DC gain reaches {dc_max_eig:.6}, violating the strict bound"
        )));
    }

    let lyap = &(&a_cl * &yv) + &(&yv * &a_cl.transpose());
    let lyap_eig = sym_eig(&lyap.symmetrize())?;
    let lyapunov_max_eig = *lyap_eig.values.last().unwrap_or(&0.0);

    Ok(SynthesisResult {
        k,
        y: yv,
        m: mvv,
        epsilon: eps,
        closed_loop: closed,
        lyapunov_max_eig,
        dc_max_eig,
        caveats,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RobustnessAudit {
    /// samples that satisfied every admissibility condition
    pub admissible: usize,
    /// (index, reason) for samples that failed admissibility
    pub excluded: Vec<(usize, String)>,
    /// worst closed-loop spectral abscissa over the admissible samples
    pub worst_abscissa: Option<f64>,
}

/// Close the w-z loop of a synthesis result with each uncertainty sample
/// and confirm internal stability. Samples must be strictly negative
/// imaginary with DC gain eigenvalues in [-1, 1] and PSD feedthrough;
/// anything else is excluded and reported rather than tested. A stability
/// failure on an admissible sample is an error: the DC-gain design rule
/// guarantees those loops.
pub fn robust_stability_audit(
    result: &SynthesisResult,
    samples: &[StateSpace],
    opts: &AnalysisOptions,
) -> Result<RobustnessAudit, SynthesisError> {
    let m = result.closed_loop.outputs();
    let mut excluded = Vec::new();
    let mut admissible = 0usize;
    let mut worst: Option<f64> = None;

    for (index, delta) in samples.iter().enumerate() {
        if delta.inputs() != m || delta.outputs() != m {
            excluded.push((
                index,
                format!(
                    "shape {}x{} does not match the {m}x{m} uncertainty channel",
                    delta.outputs(),
                    delta.inputs()
                ),
            ));
            continue;
        }
        // the zero sample is the nominal loop, not an SNI uncertainty;
        // admit it and let the stability check below cover it
        let is_zero = delta.order() == 0 && delta.d().max_abs() == 0.0;
        if is_zero {
            admissible += 1;
            let stab = internal_stability(&result.closed_loop)?;
            if !stab.stable {
                return Err(SynthesisError::AuditFailed {
                    index,
                    abscissa: stab.abscissa,
                });
            }
            worst = Some(worst.map_or(stab.abscissa, |w: f64| w.max(stab.abscissa)));
            continue;
        }
        let verdict = match classify(delta, opts) {
            Ok(v) => v,
            Err(e) => {
                excluded.push((index, format!("classification failed: {e}")));
                continue;
            }
        };
        if !verdict.property.at_least(&NiProperty::Sni) {
            excluded.push((
                index,
                format!("not strictly negative imaginary (got {:?})", verdict.property),
            ));
            continue;
        }
        let dc = match delta.dc_gain() {
            Ok(g) => g,
            Err(e) => {
                excluded.push((index, format!("DC gain unavailable: {e}")));
                continue;
            }
        };
        let dc_eig = sym_eig(&dc.symmetrize())?;
        let lam_max = *dc_eig.values.last().unwrap_or(&0.0);
        if lam_max.abs() > 1.0 + 1e-9 {
            excluded.push((
                index,
                format!("largest DC eigenvalue {lam_max:.6} outside [-1, 1]"),
            ));
            continue;
        }
        let d_rep = definiteness(
            &delta.d().symmetrize(),
            1e-9 * (1.0 + delta.d().frobenius_norm()),
        )?;
        if !d_rep.is_psd() {
            excluded.push((
                index,
                format!("feedthrough not PSD (min eigenvalue {:.3e})", d_rep.min_eig),
            ));
            continue;
        }

        admissible += 1;
        let loop_sys = positive_feedback(&result.closed_loop, delta)?;
        let stab = internal_stability(&loop_sys)?;
        if !stab.stable {
            return Err(SynthesisError::AuditFailed {
                index,
                abscissa: stab.abscissa,
            });
        }
        worst = Some(worst.map_or(stab.abscissa, |w: f64| w.max(stab.abscissa)));
    }

    Ok(RobustnessAudit {
        admissible,
        excluded,
        worst_abscissa: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::{make_integral_resonant, make_ppf, PpfParams};

    fn scalar_plant() -> UncertainPlant {
        UncertainPlant::new(
            Mat::scalar(1.0),
            Mat::scalar(1.0),
            Mat::scalar(1.0),
            Mat::scalar(1.0),
        )
        .unwrap()
    }

    #[test]
    fn scalar_example_recovers_a_stabilizing_ni_gain() {
        let opts = AnalysisOptions::default();
        let r = synth_state_feedback(&scalar_plant(), None, &opts).unwrap();
        // equality forces M = -1 - Y, so K = -(1 + Y)/Y and Acl = -1/Y < -1
        let a_cl = 1.0 + r.k[(0, 0)];
        assert!(a_cl < -1.0 + 1e-6, "Acl = {a_cl}");
        assert!(r.dc_max_eig > 0.0 && r.dc_max_eig < 1.0, "dc {}", r.dc_max_eig);
        let y = r.y[(0, 0)];
        assert!((r.dc_max_eig - y).abs() < 1e-6);
        assert!((r.k[(0, 0)] * y - r.m[(0, 0)]).abs() < 1e-9);
    }

    #[test]
    fn one_mode_flexible_plant_synthesizes() {
        // lightly damped collocated mode; the uncertainty output blends
        // position with a little velocity so that C1 B1 + B1' C1' > 0,
        // without which the strict decay inequality has no solutions
        let plant = UncertainPlant::new(
            Mat::from_rows(2, 2, &[0.0, 1.0, -4.0, -0.1]),
            Mat::column(&[0.0, 1.0]),
            Mat::column(&[0.0, 1.0]),
            Mat::row(&[1.0, 0.1]),
        )
        .unwrap();
        let opts = AnalysisOptions::default();
        let r = synth_state_feedback(&plant, None, &opts).unwrap();
        assert!(r.lyapunov_max_eig <= 0.0);
        assert!(r.dc_max_eig < 1.0);
        let stab = internal_stability(&r.closed_loop).unwrap();
        assert!(stab.stable, "abscissa {}", stab.abscissa);
    }

    #[test]
    fn decay_margin_is_respected_at_several_values() {
        let opts = AnalysisOptions::default();
        for eps in [0.1, 0.5, 1.0] {
            let r = synth_state_feedback(&scalar_plant(), Some(eps), &opts).unwrap();
            assert_eq!(r.epsilon, eps);
            assert!(
                r.lyapunov_max_eig <= -eps + 1e-6,
                "margin {} at eps {eps}",
                r.lyapunov_max_eig
            );
        }
    }

    #[test]
    fn uncontrollable_unstable_channel_is_infeasible() {
        // B2 = 0 and the coupling equality forces Y = -1 < 0
        let plant = UncertainPlant::new(
            Mat::scalar(1.0),
            Mat::scalar(1.0),
            Mat::scalar(0.0),
            Mat::scalar(1.0),
        )
        .unwrap();
        let opts = AnalysisOptions::default();
        match synth_state_feedback(&plant, Some(1e-3), &opts) {
            Err(SynthesisError::Infeasible { .. }) => {}
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn audit_accepts_sni_samples_and_reports_the_rest() {
        let opts = AnalysisOptions::default();
        let r = synth_state_feedback(&scalar_plant(), None, &opts).unwrap();
        // 0.9/(s+1): SNI with DC gain 0.9
        let good = StateSpace::new(
            Mat::scalar(-1.0),
            Mat::scalar(1.0),
            Mat::scalar(0.9),
            Mat::scalar(0.0),
        )
        .unwrap();
        let zero = StateSpace::static_gain(Mat::scalar(0.0));
        // DC gain Phi^{-1} = 2 falls outside [-1, 1]
        let too_big = make_integral_resonant(&Mat::scalar(1.5), &Mat::scalar(0.5)).unwrap();
        let ppf = make_ppf(&PpfParams::single(0.5, 0.5, 1.0)).unwrap();
        let audit = robust_stability_audit(&r, &[good, zero, too_big, ppf], &opts).unwrap();
        // the zero sample is the nominal loop; only the large DC one drops
        assert_eq!(audit.admissible, 3, "audit {audit:?}");
        assert_eq!(audit.excluded.len(), 1);
        assert!(audit.excluded[0].1.contains("DC"), "{:?}", audit.excluded);
        assert!(audit.worst_abscissa.unwrap() < 0.0);
    }

    #[test]
    fn dimension_mismatches_are_rejected_up_front() {
        assert!(UncertainPlant::new(
            Mat::zeros(2, 3),
            Mat::zeros(2, 1),
            Mat::zeros(2, 1),
            Mat::zeros(1, 2)
        )
        .is_err());
        assert!(UncertainPlant::new(
            Mat::zeros(2, 2),
            Mat::zeros(2, 2),
            Mat::zeros(2, 1),
            Mat::zeros(1, 2)
        )
        .is_err());
    }
}
