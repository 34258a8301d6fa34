use super::{Mat, NumericsError};

/// Attempt a Cholesky factorization A = L Lᵀ of a symmetric matrix.
///
/// Success certifies positive definiteness; `None` means a nonpositive
/// pivot was hit, i.e. the matrix is not PD (to within pivot tolerance).
pub fn cholesky(a: &Mat) -> Result<Option<Mat>, NumericsError> {
    if !a.is_square() {
        return Err(NumericsError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    a.check_finite()?;
    let asym = a.asymmetry_norm();
    let scale = 1.0 + a.frobenius_norm();
    if asym > 1e-9 * scale {
        return Err(NumericsError::NotSymmetric {
            asymmetry: asym,
            tol: 1e-9 * scale,
        });
    }
    let n = a.rows();
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 {
            return Ok(None);
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / dj;
        }
    }
    Ok(Some(l))
}
