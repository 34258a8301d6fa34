use super::{Mat, NumericsError};

/// Householder QR with column pivoting: A P = Q R.
///
/// The pivoted form exposes numerical rank through the decay of |R[k,k]|,
/// which is what the equality-elimination and nullspace routines rely on.
pub struct Qrcp {
    /// m x n; strict upper triangle holds R, diagonal and below the
    /// Householder vectors (R's diagonal lives in `rdiag`)
    qr: Mat,
    /// diagonal of R
    rdiag: Vec<f64>,
    /// column permutation: column j of the factored matrix is column piv[j] of A
    piv: Vec<usize>,
    rank: usize,
    tol: f64,
}

impl Qrcp {
    pub fn new(a: &Mat) -> Result<Self, NumericsError> {
        Self::with_tolerance(a, None)
    }

    /// `rank_tol` is the relative threshold on |R[k,k]| / |R[0,0]|;
    /// defaults to max(m,n)·1e-12.
    pub fn with_tolerance(a: &Mat, rank_tol: Option<f64>) -> Result<Self, NumericsError> {
        a.check_finite()?;
        let m = a.rows();
        let n = a.cols();
        let mut qr = a.clone();
        let mut rdiag = vec![0.0; n.min(m)];
        let mut piv: Vec<usize> = (0..n).collect();
        let mut col_norms: Vec<f64> = (0..n)
            .map(|j| (0..m).map(|i| qr[(i, j)] * qr[(i, j)]).sum::<f64>())
            .collect();
        let steps = m.min(n);

        for k in 0..steps {
            // pivot: bring the column with the largest remaining norm to front
            let mut p = k;
            for j in (k + 1)..n {
                if col_norms[j] > col_norms[p] {
                    p = j;
                }
            }
            if p != k {
                for i in 0..m {
                    let t = qr[(i, k)];
                    qr[(i, k)] = qr[(i, p)];
                    qr[(i, p)] = t;
                }
                col_norms.swap(k, p);
                piv.swap(k, p);
            }

            // Householder reflector annihilating qr[k+1.., k]
            let mut norm = 0.0f64;
            for i in k..m {
                norm = norm.hypot(qr[(i, k)]);
            }
            if norm == 0.0 {
                rdiag[k] = 0.0;
                continue;
            }
            if qr[(k, k)] < 0.0 {
                norm = -norm;
            }
            for i in k..m {
                qr[(i, k)] /= norm;
            }
            qr[(k, k)] += 1.0;

            for j in (k + 1)..n {
                let mut s = 0.0;
                for i in k..m {
                    s += qr[(i, k)] * qr[(i, j)];
                }
                s = -s / qr[(k, k)];
                for i in k..m {
                    qr[(i, j)] += s * qr[(i, k)];
                }
                // downdate the remaining column norm
                let v = qr[(k, j)];
                col_norms[j] = (col_norms[j] - v * v).max(0.0);
            }
            rdiag[k] = -norm;
        }

        let tol = rank_tol.unwrap_or(m.max(n) as f64 * 1e-12);
        let r00 = if rdiag.is_empty() { 0.0 } else { rdiag[0].abs() };
        let mut rank = 0;
        if r00 > 0.0 {
            for (k, d) in rdiag.iter().enumerate().take(steps) {
                if d.abs() > tol * r00 {
                    rank = k + 1;
                } else {
                    break;
                }
            }
        }
        Ok(Qrcp {
            qr,
            rdiag,
            piv,
            rank,
            tol,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn rank_tolerance(&self) -> f64 {
        self.tol
    }

    /// Apply Qᵀ to a copy of b (all columns).
    fn qt_mul(&self, b: &Mat) -> Mat {
        let m = self.qr.rows();
        let mut y = b.clone();
        for k in 0..self.qr.cols().min(m) {
            if self.rdiag[k] == 0.0 {
                continue;
            }
            for j in 0..y.cols() {
                let mut s = 0.0;
                for i in k..m {
                    s += self.qr[(i, k)] * y[(i, j)];
                }
                s = -s / self.qr[(k, k)];
                for i in k..m {
                    y[(i, j)] += s * self.qr[(i, k)];
                }
            }
        }
        y
    }

    /// Minimum-residual solution of A x = b using only the rank-revealed
    /// leading block; free variables are set to zero. Also returns the
    /// residual norm ‖Ax − b‖_F so the caller can decide on consistency.
    pub fn solve_min_residual(&self, a: &Mat, b: &Mat) -> Result<(Mat, f64), NumericsError> {
        let m = self.qr.rows();
        let n = self.qr.cols();
        if b.rows() != m {
            return Err(NumericsError::DimensionMismatch(format!(
                "rhs has {} rows, expected {}",
                b.rows(),
                m
            )));
        }
        let r = self.rank;
        let y = self.qt_mul(b);
        let mut z = Mat::zeros(n, b.cols());
        for j in 0..b.cols() {
            for i in (0..r).rev() {
                let mut s = y[(i, j)];
                for k in (i + 1)..r {
                    s -= self.qr[(i, k)] * z[(k, j)];
                }
                z[(i, j)] = s / self.rdiag[i];
            }
        }
        // undo the column permutation
        let mut x = Mat::zeros(n, b.cols());
        for i in 0..n {
            for j in 0..b.cols() {
                x[(self.piv[i], j)] = z[(i, j)];
            }
        }
        let resid = (&(a * &x) - b).frobenius_norm();
        Ok((x, resid))
    }

    /// Orthonormal basis for the (numerical) nullspace of A, as columns.
    /// Returns an n x 0 matrix when A has full column rank.
    pub fn nullspace(&self) -> Mat {
        let n = self.qr.cols();
        let r = self.rank;
        let dim = n - r;
        let mut basis = Mat::zeros(n, dim);
        // For each free column f = r..n, solve R11 w = -R12 e_{f-r} and embed.
        for (idx, f) in (r..n).enumerate() {
            let mut w = vec![0.0; r];
            for i in (0..r).rev() {
                let mut s = -self.qr[(i, f)];
                for k in (i + 1)..r {
                    s -= self.qr[(i, k)] * w[k];
                }
                w[i] = s / self.rdiag[i];
            }
            for i in 0..r {
                basis[(self.piv[i], idx)] = w[i];
            }
            basis[(self.piv[f], idx)] = 1.0;
        }
        // Gram–Schmidt with reorthogonalization; the columns are already
        // independent so this only orthonormalizes them.
        orthonormalize_columns(&mut basis);
        basis
    }
}

fn orthonormalize_columns(m: &mut Mat) {
    let rows = m.rows();
    let cols = m.cols();
    for j in 0..cols {
        for _pass in 0..2 {
            for k in 0..j {
                let mut dot = 0.0;
                for i in 0..rows {
                    dot += m[(i, k)] * m[(i, j)];
                }
                for i in 0..rows {
                    m[(i, j)] -= dot * m[(i, k)];
                }
            }
        }
        let mut norm = 0.0f64;
        for i in 0..rows {
            norm = norm.hypot(m[(i, j)]);
        }
        if norm > 0.0 {
            for i in 0..rows {
                m[(i, j)] /= norm;
            }
        }
    }
}

/// Numerical rank via pivoted QR.
pub fn rank(a: &Mat) -> Result<usize, NumericsError> {
    Ok(Qrcp::new(a)?.rank())
}
