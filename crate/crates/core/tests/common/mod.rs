//! Corpus generators shared by the integration suites.
//!
//! The negative-imaginary generator builds systems the long way around: it
//! draws a certificate first (Y > 0 together with a negative definite
//! dissipation S and a skew part T) and then reads the realization off it,
//!   A = (S/2 + T) Y^{-1},  B = -A Y C'.
//! Every system produced this way is strictly negative imaginary with a
//! Hurwitz, nonsingular A, so the suites always know the ground truth
//! independently of the code under test.

#![allow(dead_code)]

use ni_core::analysis::AnalysisOptions;
use ni_core::controllers::make_integral_resonant;
use ni_core::lti::{minimality, sum};
use ni_core::modal::{random_structure, ModalModel};
use ni_core::numerics::{solve_linear, sym_eig, Mat};
use ni_core::StateSpace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn opts() -> AnalysisOptions {
    AnalysisOptions::default()
}

/// Largest eigenvalue of the symmetric part, used on DC gain products.
pub fn max_sym_eig(m: &Mat) -> f64 {
    let eig = sym_eig(&m.symmetrize()).expect("symmetric eigensolve");
    *eig.values.last().expect("nonempty spectrum")
}

fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// Strictly negative imaginary system of order n with m ports, drawn from
/// the certificate-first construction above. Resamples until C has enough
/// reach that CB + B'C' is comfortably positive definite and the
/// realization is minimal, so the exact tests apply without edge-casing.
pub fn random_ni_statespace(seed: u64, n: usize, m: usize) -> StateSpace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(17));
    loop {
        let r = random_mat(&mut rng, n, n);
        let y = &(&r * &r.transpose()) + &Mat::identity(n).scale(0.3 * n as f64);
        let g = random_mat(&mut rng, n, n);
        let s = (&(&g * &g.transpose()) + &Mat::identity(n).scale(0.1)).scale(-1.0);
        let w = random_mat(&mut rng, n, n);
        let t = (&w - &w.transpose()).scale(0.5);
        let half_s_plus_t = &s.scale(0.5) + &t;
        // A Y = S/2 + T  =>  Y A' = (S/2 + T)'
        let a = solve_linear(&y, &half_s_plus_t.transpose())
            .expect("Y is positive definite")
            .transpose();
        let c = random_mat(&mut rng, m, n);
        let b = (&(&a * &y) * &c.transpose()).scale(-1.0);

        let q0 = &(&c * &b) + &(&c * &b).transpose();
        let eig = sym_eig(&q0).expect("symmetric eigensolve");
        let lmin = *eig.values.first().unwrap();
        let lmax = *eig.values.last().unwrap();
        if lmin < 1e-4 * (1.0 + lmax.abs()) {
            continue;
        }
        let sys = StateSpace::new(a, b, c, Mat::zeros(m, m)).expect("consistent shapes");
        if !minimality(&sys).expect("minimality check").is_minimal() {
            continue;
        }
        return sys;
    }
}

/// Negate the output map. Flipping C negates j[R - R*] pointwise, so the
/// mutant of a strictly NI system is strictly not NI while keeping the
/// poles, minimality, and conditioning of the original.
pub fn c_flip(sys: &StateSpace) -> StateSpace {
    StateSpace::new(
        sys.a().clone(),
        sys.b().clone(),
        sys.c().scale(-1.0),
        sys.d().clone(),
    )
    .expect("same shapes as the original")
}

/// The hundred flexible structures used across the suites: 1 to 5 modes,
/// 1 to 3 collocated ports, deterministic seeds.
pub fn modal_corpus(count: usize) -> Vec<ModalModel> {
    (0..count)
        .map(|i| random_structure(1000 + i as u64, 1 + i % 5, 1 + i % 3))
        .collect()
}

/// Scalar two-term family g/(s+a) - beta/(s^2 + kappa s + omega^2).
///
/// The lag keeps CB = g > 0 and the subtracted resonant term pulls the
/// imaginary part up near its peak; large beta makes the response leave
/// the NI cone on a band around omega while small beta keeps it inside.
/// beta stays below g*min(kappa, omega^2/a), which keeps both numerator
/// coefficients positive, hence no right-half-plane zeros.
pub fn dip_family(seed: u64) -> StateSpace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x517c_c1b7).wrapping_add(3));
    let a = rng.gen_range(0.5..2.0);
    let g = rng.gen_range(0.5..2.0);
    let kappa: f64 = rng.gen_range(0.15..0.6);
    let omega = rng.gen_range(0.7..2.5);
    let beta_cap = 0.95 * g * kappa.min(omega * omega / a);
    let beta = rng.gen_range(0.05 * beta_cap..beta_cap);
    let lag = StateSpace::siso_from_tf(&[g], &[a, 1.0]).unwrap();
    let res = StateSpace::siso_from_tf(&[beta], &[omega * omega, kappa, 1.0]).unwrap();
    sum(&lag, &c_flip(&res)).unwrap()
}

/// A plant/controller pair whose DC loop-gain spectrum peaks at exactly
/// `tau`: a random flexible structure against an integral resonant
/// controller with Phi = (lambda_max P(0) / tau) I. Both sides keep their
/// classifications (plant NI, controller SNI) for every tau > 0.
pub fn ni_sni_pair(seed: u64, tau: f64) -> (StateSpace, StateSpace) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x2545_f491).wrapping_add(7));
    let n_modes = 1 + (seed as usize) % 3;
    let m = 1 + (seed as usize) % 2;
    let plant = random_structure(40_000 + seed, n_modes, m).realize();
    let p0 = plant.dc_gain().expect("modal A is invertible");
    let lam = max_sym_eig(&p0);
    let phi = Mat::identity(m).scale(lam / tau);
    let gm = random_mat(&mut rng, m, m);
    let gamma = &(&gm * &gm.transpose()) + &Mat::identity(m).scale(0.5);
    let ctrl = make_integral_resonant(&gamma, &phi).expect("positive definite data");
    (plant, ctrl)
}
