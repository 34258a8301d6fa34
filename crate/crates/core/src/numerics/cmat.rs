use std::fmt;

use num_complex::Complex64;
use serde::Serialize;

use super::Mat;

/// Dense complex matrix stored as separate real and imaginary row-major arrays.
#[derive(Clone, PartialEq, Serialize)]
pub struct CMat {
    rows: usize,
    cols: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            re: vec![0.0; rows * cols],
            im: vec![0.0; rows * cols],
        }
    }

    pub fn from_real(m: &Mat) -> Self {
        CMat {
            rows: m.rows(),
            cols: m.cols(),
            re: m.data().to_vec(),
            im: vec![0.0; m.rows() * m.cols()],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = CMat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        let k = i * self.cols + j;
        Complex64::new(self.re[k], self.im[k])
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        let k = i * self.cols + j;
        self.re[k] = v.re;
        self.im[k] = v.im;
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_finite(&self) -> bool {
        self.re.iter().chain(self.im.iter()).all(|v| v.is_finite())
    }

    pub fn real_part(&self) -> Mat {
        Mat::from_rows(self.rows, self.cols, &self.re)
    }

    pub fn imag_part(&self) -> Mat {
        Mat::from_rows(self.rows, self.cols, &self.im)
    }

    /// Conjugate transpose M*.
    pub fn adjoint(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self.at(j, i).conj())
    }

    pub fn transpose(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self.at(j, i))
    }

    pub fn conj(&self) -> CMat {
        CMat {
            rows: self.rows,
            cols: self.cols,
            re: self.re.clone(),
            im: self.im.iter().map(|v| -v).collect(),
        }
    }

    pub fn add(&self, other: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMat {
            rows: self.rows,
            cols: self.cols,
            re: self.re.iter().zip(&other.re).map(|(a, b)| a + b).collect(),
            im: self.im.iter().zip(&other.im).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMat {
            rows: self.rows,
            cols: self.cols,
            re: self.re.iter().zip(&other.re).map(|(a, b)| a - b).collect(),
            im: self.im.iter().zip(&other.im).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, alpha: Complex64) -> CMat {
        CMat::from_fn(self.rows, self.cols, |i, j| alpha * self.at(i, j))
    }

    pub fn matmul(&self, other: &CMat) -> CMat {
        assert_eq!(self.cols, other.rows, "complex matmul dimension mismatch");
        let mut out = CMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.at(i, k);
                if aik.re == 0.0 && aik.im == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.at(i, j) + aik * other.at(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.re
            .iter()
            .chain(self.im.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                best = best.max(self.at(i, j).norm());
            }
        }
        best
    }

    /// ‖M − M*‖_F, zero for Hermitian matrices.
    pub fn hermitian_asymmetry(&self) -> f64 {
        assert!(self.is_square());
        let mut s = 0.0;
        for i in 0..self.rows {
            // diagonal of a Hermitian matrix is real
            s += self.at(i, i).im.powi(2) * 2.0;
            for j in (i + 1)..self.cols {
                let d = self.at(i, j) - self.at(j, i).conj();
                s += 2.0 * d.norm_sqr();
            }
        }
        s.sqrt()
    }

    /// (M + M*)/2
    pub fn hermitian_part(&self) -> CMat {
        assert!(self.is_square());
        CMat::from_fn(self.rows, self.cols, |i, j| {
            0.5 * (self.at(i, j) + self.at(j, i).conj())
        })
    }

    /// Real symmetric embedding [[Re, −Im], [Im, Re]] of a Hermitian matrix.
    /// Its spectrum is that of the complex matrix with every eigenvalue doubled.
    pub fn hermitian_embedding(&self) -> Mat {
        assert!(self.is_square());
        let n = self.rows;
        let mut m = Mat::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let v = self.at(i, j);
                m[(i, j)] = v.re;
                m[(n + i, n + j)] = v.re;
                m[(i, n + j)] = -v.im;
                m[(n + i, j)] = v.im;
            }
        }
        m.symmetrize()
    }

    pub fn approx_eq(&self, other: &CMat, rel_tol: f64) -> bool {
        if self.rows != other.rows || self.cols != other.cols {
            return false;
        }
        let scale = 1.0 + self.frobenius_norm().max(other.frobenius_norm());
        self.sub(other).frobenius_norm() <= rel_tol * scale
    }
}

impl fmt::Debug for CMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let v = self.at(i, j);
                write!(f, "{:>10.4}{:+.4}j ", v.re, v.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}
