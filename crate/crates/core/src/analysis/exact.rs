//! Spectral tests that avoid LMI feasibility searches entirely.
//!
//! Both tests reduce the frequency-domain condition to eigenvalue
//! computations on fixed matrices: a Hamiltonian-like matrix whose
//! imaginary eigenvalues mark the frequencies where j[R(jw) - R(jw)*]
//! goes singular, and for single-input single-output systems a product
//! matrix whose negative real eigenvalues play the same role.

use num_complex::Complex64;

use super::{
    high_frequency_gain, require_minimal, require_square, require_symmetric_feedthrough,
    AnalysisError, AnalysisOptions, Certificate, Evidence, FrequencyWitness, Method, NiProperty,
    NiVerdict,
};
use crate::lti::{
    eig_resolution, internal_stability, poles_and_residues, FrequencyEvaluator, LtiError,
    StateSpace,
};
use crate::numerics::{
    definiteness, eigenvalues, hermitian_definiteness, inverse, CLu, CMat, Mat,
};

/// Cluster sorted scalars greedily at the given absolute resolution and
/// return (center, count) pairs.
fn cluster_scalars(mut vals: Vec<f64>, band: f64) -> Vec<(f64, usize)> {
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<(f64, usize)> = Vec::new();
    for v in vals {
        match out.last_mut() {
            Some((center, count)) if (v - *center).abs() <= band => {
                *center = (*center * *count as f64 + v) / (*count as f64 + 1.0);
                *count += 1;
            }
            _ => out.push((v, 1)),
        }
    }
    out
}

/// Eigenvalue test for negative imaginaryness when A is Hurwitz and the
/// high-frequency gain CB + B'C' is positive definite. The imaginary
/// eigenvalues of the test matrix are the only frequencies where the
/// frequency-domain matrix can change definiteness, so checking one point
/// between each adjacent pair settles the sign everywhere.
pub fn hamiltonian_ni_test(
    sys: &StateSpace,
    opts: &AnalysisOptions,
) -> Result<NiVerdict, AnalysisError> {
    require_square(sys)?;
    require_symmetric_feedthrough(sys)?;
    let n = sys.order();
    if n == 0 {
        return Err(AnalysisError::AssumptionViolated(
            "static system has no high-frequency gain to invert".into(),
        ));
    }
    let stab = internal_stability(sys)?;
    if !stab.stable {
        return Err(AnalysisError::NotHurwitz {
            abscissa: stab.abscissa,
        });
    }
    let q0 = high_frequency_gain(sys);
    let q_rep = definiteness(&q0, 1e-9 * (1.0 + q0.frobenius_norm()))?;
    if !q_rep.is_pd() {
        return Err(AnalysisError::IndefiniteQ {
            min_eig: q_rep.min_eig,
        });
    }

    let qinv = inverse(&q0)?;
    let ca = sys.c() * sys.a();
    let atct = &sys.a().transpose() * &sys.c().transpose();
    let bq = sys.b() * &qinv;
    let n11 = &(&bq * &ca) - sys.a();
    let n12 = &bq * &sys.b().transpose();
    let n21 = (&(&atct * &qinv) * &ca).scale(-1.0);
    let n22 = &sys.a().transpose() - &(&(&atct * &qinv) * &sys.b().transpose());
    let nmat = Mat::from_blocks(&[&[&n11, &n12], &[&n21, &n22]]);

    let band = 1e-7 * (1.0 + nmat.frobenius_norm());
    let eigs = eigenvalues(&nmat)?;
    let mut caveats = Vec::new();

    let zero_count = eigs.iter().filter(|l| l.norm() <= band).count();
    if zero_count % 2 == 1 {
        return Ok(NiVerdict::failure(
            Method::Hamiltonian,
            format!("test matrix has an odd eigenvalue cluster ({zero_count}) at the origin"),
        ));
    }
    let positive: Vec<f64> = eigs
        .iter()
        .filter(|l| l.re.abs() <= band && l.im > band)
        .map(|l| l.im)
        .collect();
    let clusters = cluster_scalars(positive, band);
    for (center, count) in &clusters {
        if count % 2 == 1 {
            return Ok(NiVerdict::failure(
                Method::Hamiltonian,
                format!(
                    "imaginary eigenvalue cluster at w = {center:.6} has odd multiplicity {count}; \
                     the frequency-domain matrix changes definiteness there"
                ),
            ));
        }
    }
    for pair in clusters.windows(2) {
        if pair[1].0 - pair[0].0 < 10.0 * band {
            caveats.push(format!(
                "eigenvalue clusters at {:.6} and {:.6} are barely separated; \
                 the verdict is sensitive to the clustering resolution",
                pair[0].0, pair[1].0
            ));
        }
    }

    // the frequency-domain matrix is singular at w = 0 for every system in
    // this class, so 0 always heads the crossing list
    let mut crossings = vec![0.0f64];
    crossings.extend(clusters.iter().map(|(c, _)| *c));
    let rho = eigenvalues(sys.a())?
        .iter()
        .map(|l| l.norm())
        .fold(0.0f64, f64::max)
        .max(1.0);
    let mut samples: Vec<f64> = crossings.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    // beyond the last crossing the matrix behaves like Q/w > 0; one sample
    // out there confirms the sign convention
    let last = *crossings.last().unwrap();
    samples.push(if last > 0.0 { 2.0 * last } else { rho });

    let evaluator = FrequencyEvaluator::new(sys)?;
    let mut worst = FrequencyWitness {
        omega: samples[0],
        min_eigenvalue: f64::INFINITY,
    };
    for &eta in &samples {
        let m = evaluator.ni_matrix_at(eta)?;
        let rep = hermitian_definiteness(&m, 0.0)?;
        let tol = opts.psd_tol * (1.0 + m.frobenius_norm());
        if rep.min_eig < worst.min_eigenvalue {
            worst = FrequencyWitness {
                omega: eta,
                min_eigenvalue: rep.min_eig,
            };
        }
        if rep.min_eig < -tol {
            return Ok(NiVerdict {
                property: NiProperty::None,
                method: Method::Hamiltonian,
                evidence: Evidence::Witness(FrequencyWitness {
                    omega: eta,
                    min_eigenvalue: rep.min_eig,
                }),
                caveats,
            });
        }
        if rep.min_eig.abs() <= tol && eta > 0.0 {
            caveats.push(format!(
                "frequency-domain matrix is borderline singular at the sample w = {eta:.6}"
            ));
        }
    }

    let mut cert = Certificate::default();
    cert.push_matrix("N", nmat);
    if crossings.len() > 1 {
        cert.push_matrix("crossings", Mat::row(&crossings));
    }
    cert.push_margin("worst_midpoint_min_eig", worst.min_eigenvalue);
    Ok(NiVerdict {
        property: NiProperty::Ni,
        method: Method::Hamiltonian,
        evidence: Evidence::Certificate(cert),
        caveats,
    })
}

/// Numerator polynomial of a scalar transfer function, ascending powers,
/// recovered by sampling G(z) det(zI - A) on a circle clear of the poles.
fn scalar_numerator(sys: &StateSpace) -> Result<Vec<f64>, AnalysisError> {
    let n = sys.order();
    let eigs = eigenvalues(sys.a())?;
    let rho = eigs.iter().map(|l| l.norm()).fold(0.0f64, f64::max).max(1.0);
    let mut radius = 1.37 * (1.0 + rho);
    for _ in 0..8 {
        let closest = eigs
            .iter()
            .map(|l| (l.norm() - radius).abs())
            .fold(f64::INFINITY, f64::min);
        if closest > 1e-3 * radius {
            break;
        }
        radius *= 1.29;
    }
    let d = sys.d()[(0, 0)];
    let coeffs = crate::numerics::poly_from_samples(n, radius, |z| {
        let mut zia = CMat::from_real(&sys.a().scale(-1.0));
        for i in 0..n {
            zia.set(i, i, zia.at(i, i) + z);
        }
        let lu = CLu::new(&zia)?;
        let bc = CMat::from_real(sys.b());
        let x = lu.solve_mat(&bc)?;
        let mut g = Complex64::new(d, 0.0);
        for k in 0..n {
            g += Complex64::new(sys.c()[(0, k)], 0.0) * x.at(k, 0);
        }
        Ok(g * lu.det())
    })?;
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    let real = crate::numerics::real_parts_if_real(&coeffs, 1e-6).ok_or_else(|| {
        AnalysisError::AssumptionViolated(
            "numerator interpolation did not produce real coefficients".into(),
        )
    })?;
    let mut trimmed = real;
    while trimmed.len() > 1 && trimmed.last().map_or(false, |c| c.abs() <= 1e-9 * scale) {
        trimmed.pop();
    }
    Ok(trimmed)
}

/// Scalar test: with CB > 0, poles and zeros in the closed left half-plane,
/// no pole at the origin and simple imaginary poles, the system is negative
/// imaginary exactly when (I - BC/CB) A^2 has no odd eigenvalue cluster on
/// the open negative real axis and every imaginary pole has a positive
/// residue after multiplication by s.
pub fn siso_ni_test(sys: &StateSpace, opts: &AnalysisOptions) -> Result<NiVerdict, AnalysisError> {
    if sys.outputs() != 1 || sys.inputs() != 1 {
        return Err(AnalysisError::SisoOnly {
            outputs: sys.outputs(),
            inputs: sys.inputs(),
        });
    }
    require_minimal(sys)?;
    let n = sys.order();
    if n == 0 {
        return Ok(NiVerdict {
            property: NiProperty::Ni,
            method: Method::SisoExact,
            evidence: Evidence::None,
            caveats: vec!["static scalar gain; nothing to test".into()],
        });
    }
    let cb = (sys.c() * sys.b())[(0, 0)];
    let cb_floor = 1e-12 * (1.0 + sys.b().frobenius_norm() * sys.c().frobenius_norm());
    if cb <= cb_floor {
        return Err(AnalysisError::CbNotPositive(cb));
    }

    let res = eig_resolution(sys.a().frobenius_norm());
    let poles = poles_and_residues(sys)?;
    let mut axis_poles = Vec::new();
    for info in &poles {
        if info.location.re > res {
            return Err(AnalysisError::AssumptionViolated(format!(
                "pole in the open right half-plane at {:.6}",
                info.location
            )));
        }
        if info.location.norm() <= res {
            return Err(AnalysisError::AssumptionViolated(
                "pole at the origin".into(),
            ));
        }
        if info.on_imaginary_axis {
            if info.multiplicity > 1 {
                return Err(AnalysisError::AssumptionViolated(format!(
                    "repeated imaginary pole at {:.6}",
                    info.location
                )));
            }
            if info.location.im > 0.0 {
                axis_poles.push(info.clone());
            }
        }
    }

    let numerator = scalar_numerator(sys)?;
    if numerator.len() > 1 {
        for root in crate::numerics::real_poly_roots(&numerator)? {
            if root.re > 1e-6 * (1.0 + root.norm()) {
                return Err(AnalysisError::AssumptionViolated(format!(
                    "zero in the open right half-plane at {root:.6}"
                )));
            }
        }
    }

    let mut caveats = Vec::new();
    let evaluator = FrequencyEvaluator::new(sys)?;

    // each simple imaginary pole must carry a positive residue once the
    // transfer function is multiplied by s
    for info in &axis_poles {
        let residue = info.residue.as_ref().expect("simple axis pole has residue");
        let val = info.location * residue.at(0, 0);
        if val.im.abs() > 1e-7 * (1.0 + val.norm()) {
            caveats.push(format!(
                "residue of s G(s) at {:.6} is not real ({val:.6})",
                info.location
            ));
            return Ok(NiVerdict {
                property: NiProperty::None,
                method: Method::SisoExact,
                evidence: Evidence::None,
                caveats,
            });
        }
        if val.re <= opts.psd_tol * (1.0 + val.norm()) {
            caveats.push(format!(
                "residue of s G(s) at {:.6} is not positive ({:.6})",
                info.location, val.re
            ));
            return Ok(NiVerdict {
                property: NiProperty::None,
                method: Method::SisoExact,
                evidence: Evidence::None,
                caveats,
            });
        }
    }

    // sign changes of the scalar frequency-domain quantity happen exactly
    // at w with -w^2 an eigenvalue of T; odd clusters mean a real change,
    // even ones a touch
    let bc = sys.b() * sys.c();
    let a2 = sys.a() * sys.a();
    let t = &(&Mat::identity(n) - &bc.scale(1.0 / cb)) * &a2;
    let band = 1e-7 * (1.0 + t.frobenius_norm());
    let negative: Vec<f64> = eigenvalues(&t)?
        .iter()
        .filter(|l| l.re < -band && l.im.abs() <= band)
        .map(|l| l.re)
        .collect();
    for (center, count) in cluster_scalars(negative, band) {
        if count % 2 == 1 {
            let w = (-center).sqrt();
            caveats.push(format!(
                "eigenvalue {center:.6} of the product matrix has odd multiplicity; \
                 the imaginary part changes sign at w = {w:.6}"
            ));
            let evidence = match evaluator.ni_min_eig_at(1.02 * w) {
                Ok(me) => Evidence::Witness(FrequencyWitness {
                    omega: 1.02 * w,
                    min_eigenvalue: me,
                }),
                Err(LtiError::NearPole { .. }) => Evidence::None,
                Err(e) => return Err(e.into()),
            };
            return Ok(NiVerdict {
                property: NiProperty::None,
                method: Method::SisoExact,
                evidence,
                caveats,
            });
        }
    }

    let mut cert = Certificate::default();
    cert.push_matrix("T", t);
    cert.push_margin("cb", cb);
    Ok(NiVerdict {
        property: NiProperty::Ni,
        method: Method::SisoExact,
        evidence: Evidence::Certificate(cert),
        caveats,
    })
}
