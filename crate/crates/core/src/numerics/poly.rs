use num_complex::Complex64;

use super::{gen_eig, Mat, NumericsError};

/// Recover the coefficients of a polynomial of degree at most `degree` from
/// evaluations on a circle of the given radius, by an inverse DFT at the
/// scaled roots of unity. Coefficients come back ascending in power.
///
/// Intended for determinants of small polynomial matrices, where evaluating
/// at a point is cheap and exact degree bounds are known a priori.
pub fn poly_from_samples(
    degree: usize,
    radius: f64,
    mut eval: impl FnMut(Complex64) -> Result<Complex64, NumericsError>,
) -> Result<Vec<Complex64>, NumericsError> {
    let n = degree + 1;
    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        let z = Complex64::from_polar(radius, theta);
        samples.push(eval(z)?);
    }
    let mut coeffs = Vec::with_capacity(n);
    for j in 0..n {
        let mut c = Complex64::new(0.0, 0.0);
        for (k, p) in samples.iter().enumerate() {
            let theta = -2.0 * std::f64::consts::PI * (j * k) as f64 / n as f64;
            c += p * Complex64::from_polar(1.0, theta);
        }
        c /= n as f64 * radius.powi(j as i32);
        coeffs.push(c);
    }
    Ok(coeffs)
}

/// Drop imaginary parts when they are negligible relative to the largest
/// coefficient; `None` signals genuine imaginary leakage.
pub fn real_parts_if_real(coeffs: &[Complex64], rel_tol: f64) -> Option<Vec<f64>> {
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    let worst_imag = coeffs.iter().map(|c| c.im.abs()).fold(0.0f64, f64::max);
    if worst_imag > rel_tol * (1.0 + scale) {
        return None;
    }
    Some(coeffs.iter().map(|c| c.re).collect())
}

/// Roots of a real-coefficient polynomial (ascending coefficients) via the
/// companion-matrix eigenvalues. Trailing coefficients that are tiny
/// relative to the largest one are treated as zero, lowering the degree.
pub fn real_poly_roots(coeffs: &[f64]) -> Result<Vec<Complex64>, NumericsError> {
    let scale = coeffs.iter().map(|c| c.abs()).fold(0.0f64, f64::max);
    if scale == 0.0 || coeffs.is_empty() {
        return Err(NumericsError::ZeroPolynomial);
    }
    let mut deg = coeffs.len() - 1;
    while deg > 0 && coeffs[deg].abs() <= 1e-10 * scale {
        deg -= 1;
    }
    if deg == 0 {
        return Ok(vec![]);
    }
    let lead = coeffs[deg];
    let mut companion = Mat::zeros(deg, deg);
    for i in 0..deg.saturating_sub(1) {
        companion[(i, i + 1)] = 1.0;
    }
    for j in 0..deg {
        companion[(deg - 1, j)] = -coeffs[j] / lead;
    }
    gen_eig(&companion).map(|e| e.values)
}
