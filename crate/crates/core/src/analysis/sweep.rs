//! Grid-based checks. These are falsifiers rather than proofs: a clean
//! sweep is reported as evidence with the worst grid point attached, and
//! any violation comes back with the frequency that exposed it.

use num_complex::Complex64;

use super::{
    require_square, AnalysisError, AnalysisOptions, Evidence, FrequencyWitness, Method,
    NiProperty, NiVerdict,
};
use crate::lti::{eig_resolution, poles_and_residues, FrequencyEvaluator, LtiError, StateSpace};
use crate::numerics::{eigenvalues, hermitian_definiteness, CMat};

/// Logarithmic grid spanning three decades either side of the spectral
/// radius of A, augmented with midpoints between the magnitudes of poles
/// on the imaginary axis so that sign changes pinned between two poles
/// cannot straddle the grid unseen.
pub fn default_grid(sys: &StateSpace, opts: &AnalysisOptions) -> Vec<f64> {
    let mut rho = 1.0f64;
    if sys.order() > 0 {
        if let Ok(eigs) = eigenvalues(sys.a()) {
            let r = eigs.iter().map(|l| l.norm()).fold(0.0f64, f64::max);
            if r > 1e-12 {
                rho = r;
            }
        }
    }
    let lo = 1e-3 * rho;
    let hi = 1e3 * rho;
    let n = opts.grid_points.max(2);
    let mut grid = Vec::with_capacity(n + 8);
    let log_lo = lo.ln();
    let log_hi = hi.ln();
    for k in 0..n {
        let t = k as f64 / (n - 1) as f64;
        grid.push((log_lo + t * (log_hi - log_lo)).exp());
    }
    // midpoints between imaginary-axis pole magnitudes
    if sys.order() > 0 {
        if let Ok(eigs) = eigenvalues(sys.a()) {
            let res = eig_resolution(sys.a().frobenius_norm());
            let mut mags: Vec<f64> = eigs
                .iter()
                .filter(|l| l.re.abs() <= res && l.im > res)
                .map(|l| l.im)
                .collect();
            mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
            mags.dedup_by(|a, b| (*a - *b).abs() <= res);
            for w in mags.windows(2) {
                grid.push(0.5 * (w[0] + w[1]));
            }
            if let Some(&first) = mags.first() {
                grid.push(0.5 * first);
            }
            if let Some(&last) = mags.last() {
                grid.push(1.5 * last);
            }
        }
    }
    grid.retain(|w| *w > 0.0);
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    grid
}

struct PoleScreen {
    caveats: Vec<String>,
    ok: bool,
}

/// Common pole-location screening. `allow_origin` admits a simple pole at
/// s = 0, in which case its residue is treated like the other axis residues.
fn screen_poles(
    sys: &StateSpace,
    opts: &AnalysisOptions,
    allow_origin: bool,
) -> Result<PoleScreen, AnalysisError> {
    let res = eig_resolution(sys.a().frobenius_norm());
    let mut caveats = Vec::new();
    let mut ok = true;
    for info in poles_and_residues(sys)? {
        let loc = info.location;
        if loc.re > res {
            caveats.push(format!("pole in the open right half-plane at {loc:.6}"));
            ok = false;
            continue;
        }
        let at_origin = loc.norm() <= res;
        if at_origin && !allow_origin {
            caveats.push("pole at the origin".to_string());
            ok = false;
            continue;
        }
        if !info.on_imaginary_axis {
            continue;
        }
        if info.multiplicity > 1 {
            caveats.push(format!(
                "repeated pole on the imaginary axis at {loc:.6} (multiplicity {})",
                info.multiplicity
            ));
            ok = false;
            continue;
        }
        // conjugate pairs carry conjugate residues; checking Im >= 0 covers both
        if loc.im < -res {
            continue;
        }
        if let Some(residue) = &info.residue {
            // for the NI definition the object that must be PSD Hermitian is
            // j times the residue of R at j w0; for a pole at the origin
            // (positive-real screening) it is the residue itself
            let k0 = if at_origin {
                residue.clone()
            } else {
                residue.scale(Complex64::new(0.0, 1.0))
            };
            let scale = 1.0 + k0.frobenius_norm();
            if k0.hermitian_asymmetry() > 1e-7 * scale {
                caveats.push(format!(
                    "residue matrix at pole {loc:.6} is not Hermitian (asymmetry {:.3e})",
                    k0.hermitian_asymmetry()
                ));
                ok = false;
                continue;
            }
            let report = hermitian_definiteness(&k0, opts.psd_tol * scale)?;
            if !report.is_psd() {
                caveats.push(format!(
                    "residue matrix at pole {loc:.6} has negative eigenvalue {:.3e}",
                    report.min_eig
                ));
                ok = false;
            }
        } else {
            caveats.push(format!("no residue available for axis pole at {loc:.6}"));
            ok = false;
        }
    }
    Ok(PoleScreen { caveats, ok })
}

/// Scan a Hermitian-valued frequency function for a negative eigenvalue.
/// Returns (worst point, skipped count) where the worst point minimizes the
/// slack-adjusted margin.
fn scan_grid(
    grid: &[f64],
    opts: &AnalysisOptions,
    mut eval: impl FnMut(f64) -> Result<CMat, LtiError>,
) -> Result<(Option<(FrequencyWitness, f64)>, usize), AnalysisError> {
    let mut worst: Option<(FrequencyWitness, f64)> = None;
    let mut skipped = 0usize;
    for &omega in grid {
        let m = match eval(omega) {
            Ok(m) => m,
            Err(LtiError::NearPole { .. }) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let scale = 1.0 + m.frobenius_norm();
        let report = hermitian_definiteness(&m, 0.0)?;
        let margin = report.min_eig + opts.psd_tol * scale;
        let witness = FrequencyWitness {
            omega,
            min_eigenvalue: report.min_eig,
        };
        if worst.as_ref().map_or(true, |&(_, wm)| margin < wm) {
            worst = Some((witness, margin));
        }
    }
    Ok((worst, skipped))
}

/// Direct check of the defining conditions: pole locations and axis
/// residues, then j [R(jw) - R(jw)*] >= 0 across the grid.
pub fn sweep_ni(
    sys: &StateSpace,
    grid: &[f64],
    opts: &AnalysisOptions,
) -> Result<NiVerdict, AnalysisError> {
    require_square(sys)?;
    let screen = screen_poles(sys, opts, false)?;
    if !screen.ok {
        return Ok(NiVerdict {
            property: NiProperty::None,
            method: Method::Sweep,
            evidence: Evidence::None,
            caveats: screen.caveats,
        });
    }
    let mut caveats = screen.caveats;

    let evaluator = FrequencyEvaluator::new(sys)?;
    let (worst, skipped) = scan_grid(grid, opts, |w| evaluator.ni_matrix_at(w))?;
    if skipped > 0 {
        caveats.push(format!(
            "{skipped} grid points inside the pole guard band were skipped"
        ));
    }
    match worst {
        Some((witness, margin)) if margin < 0.0 => Ok(NiVerdict {
            property: NiProperty::None,
            method: Method::Sweep,
            evidence: Evidence::Witness(witness),
            caveats,
        }),
        Some((witness, _)) => Ok(NiVerdict {
            property: NiProperty::Ni,
            method: Method::Sweep,
            evidence: Evidence::Witness(witness),
            caveats,
        }),
        None => {
            caveats.push("no usable grid points".to_string());
            Ok(NiVerdict {
                property: NiProperty::None,
                method: Method::Sweep,
                evidence: Evidence::None,
                caveats,
            })
        }
    }
}

/// Sweep-based positive-real screening: poles in the closed left half-plane,
/// simple axis poles with PSD Hermitian residues, and R(jw) + R(jw)* >= 0
/// across the grid (the origin included when it is not a pole).
pub fn positive_real_check(
    sys: &StateSpace,
    grid: &[f64],
    opts: &AnalysisOptions,
) -> Result<NiVerdict, AnalysisError> {
    require_square(sys)?;
    let screen = screen_poles(sys, opts, true)?;
    if !screen.ok {
        return Ok(NiVerdict {
            property: NiProperty::None,
            method: Method::PositiveRealSweep,
            evidence: Evidence::None,
            caveats: screen.caveats,
        });
    }
    let mut caveats = screen.caveats;

    let evaluator = FrequencyEvaluator::new(sys)?;
    let herm_sum = |w: f64| -> Result<CMat, LtiError> {
        let r = evaluator.transfer_at(Complex64::new(0.0, w))?;
        Ok(r.add(&r.adjoint()))
    };
    let mut full_grid = vec![0.0f64];
    full_grid.extend_from_slice(grid);
    let (worst, skipped) = scan_grid(&full_grid, opts, herm_sum)?;
    if skipped > 0 {
        caveats.push(format!(
            "{skipped} grid points inside the pole guard band were skipped"
        ));
    }
    match worst {
        Some((witness, margin)) if margin < 0.0 => Ok(NiVerdict {
            property: NiProperty::None,
            method: Method::PositiveRealSweep,
            evidence: Evidence::Witness(witness),
            caveats,
        }),
        Some((witness, _)) => Ok(NiVerdict {
            property: NiProperty::Pr,
            method: Method::PositiveRealSweep,
            evidence: Evidence::Witness(witness),
            caveats,
        }),
        None => {
            caveats.push("no usable grid points".to_string());
            Ok(NiVerdict {
                property: NiProperty::None,
                method: Method::PositiveRealSweep,
                evidence: Evidence::None,
                caveats,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::ni_to_pr;
    use crate::numerics::Mat;

    fn lag() -> StateSpace {
        // 1/(s+1)
        StateSpace::new(
            Mat::scalar(-1.0),
            Mat::scalar(1.0),
            Mat::scalar(1.0),
            Mat::scalar(0.0),
        )
        .unwrap()
    }

    #[test]
    fn first_order_lag_is_ni() {
        let sys = lag();
        let opts = AnalysisOptions::default();
        let grid = default_grid(&sys, &opts);
        let v = sweep_ni(&sys, &grid, &opts).unwrap();
        assert_eq!(v.property, NiProperty::Ni);
        let w = v.evidence.witness().unwrap();
        assert!(w.min_eigenvalue >= 0.0, "worst value {}", w.min_eigenvalue);
    }

    #[test]
    fn sign_flip_fails_with_witness() {
        let sys = lag().negated();
        let opts = AnalysisOptions::default();
        let grid = default_grid(&sys, &opts);
        let v = sweep_ni(&sys, &grid, &opts).unwrap();
        assert_eq!(v.property, NiProperty::None);
        let w = v.evidence.witness().unwrap();
        // j[R - R*] for -1/(s+1) is -2w/(1+w^2), worst near w = 1
        assert!(w.min_eigenvalue < -0.5, "witness {:?}", w);
    }

    #[test]
    fn undamped_resonance_passes_residue_screen() {
        // 1/(s^2+1): simple poles at +-j with K0 = 1/2
        let sys = StateSpace::siso_from_tf(&[1.0], &[1.0, 0.0, 1.0]).unwrap();
        let opts = AnalysisOptions::default();
        let grid = default_grid(&sys, &opts);
        let v = sweep_ni(&sys, &grid, &opts).unwrap();
        assert_eq!(v.property, NiProperty::Ni, "caveats: {:?}", v.caveats);
    }

    #[test]
    fn origin_pole_rejected_for_ni_but_fine_for_pr() {
        // 1/s is not NI (origin pole) but is PR
        let sys = StateSpace::siso_from_tf(&[1.0], &[0.0, 1.0]).unwrap();
        let opts = AnalysisOptions::default();
        let grid = default_grid(&sys, &opts);
        let ni = sweep_ni(&sys, &grid, &opts).unwrap();
        assert_eq!(ni.property, NiProperty::None);
        assert!(ni.caveats.iter().any(|c| c.contains("origin")));
        let pr = positive_real_check(&sys, &grid, &opts).unwrap();
        assert_eq!(pr.property, NiProperty::Pr, "caveats: {:?}", pr.caveats);
    }

    #[test]
    fn lag_maps_to_positive_real_under_s_multiplication() {
        // s/(s+1) realized from 1/(s+1); also has nonzero feedthrough
        let sys = lag();
        let pr_sys = ni_to_pr(&sys).unwrap();
        let opts = AnalysisOptions::default();
        let grid = default_grid(&pr_sys, &opts);
        let v = positive_real_check(&pr_sys, &grid, &opts).unwrap();
        assert_eq!(v.property, NiProperty::Pr, "caveats: {:?}", v.caveats);
    }

    #[test]
    fn grid_brackets_imaginary_pole_magnitudes() {
        let sys = StateSpace::siso_from_tf(&[1.0], &[4.0, 0.0, 1.0]).unwrap();
        let opts = AnalysisOptions::default();
        let grid = default_grid(&sys, &opts);
        // poles at +-2j: grid gains 1.0 and 3.0 as bracketing points
        assert!(grid.iter().any(|w| (*w - 1.0).abs() < 1e-12));
        assert!(grid.iter().any(|w| (*w - 3.0).abs() < 1e-12));
    }
}
