//! Dense linear algebra kernel used throughout the toolbox.
//!
//! Everything here is classical and self-contained: LU with partial
//! pivoting, pivoted Householder QR, Cholesky, the tred2/tql2 symmetric
//! eigensolver and the balance/orthes/hqr2 chain for general matrices.
//! Problem sizes in this toolbox are tiny (tens of states), so clarity and
//! debuggability win over blocked performance.

mod cholesky;
mod cmat;
mod definiteness;
mod eig_gen;
mod eig_sym;
mod lu;
mod mat;
mod poly;
mod qr;

pub use cholesky::cholesky;
pub use cmat::CMat;
pub use definiteness::{definiteness, hermitian_definiteness, Definiteness, DefinitenessReport};
pub use eig_gen::{balance_scales, eigenvalues, gen_eig, spectral_abscissa, GenEig};
pub use eig_sym::{sym_eig, SymEig};
pub use lu::{cdet, cond_1, inverse, solve_linear, CLu, Lu};
pub use mat::Mat;
pub use poly::{poly_from_samples, real_parts_if_real, real_poly_roots};
pub use qr::{rank, Qrcp};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is singular or near-singular (cond ~ {cond:.3e})")]
    NearSingular { cond: f64 },
    #[error("matrix is not symmetric: asymmetry norm {asymmetry:.3e} exceeds {tol:.3e}")]
    NotSymmetric { asymmetry: f64, tol: f64 },
    #[error("iteration did not converge within {iterations} steps")]
    NoConvergence { iterations: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("polynomial is identically zero to working precision")]
    ZeroPolynomial,
}
