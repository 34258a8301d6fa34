//! Small feasibility solver for linear matrix inequalities.
//!
//! Problems are stated over symmetric or rectangular matrix variables as
//! affine expressions L·X·R (optionally with X transposed) plus constants,
//! constrained to be zero or to lie in a semidefinite cone. Strict
//! inequalities are handled as explicit margins: "X ≻ 0" becomes
//! "X ⪰ δI" for a caller-chosen δ.
//!
//! The solver eliminates the equality constraints exactly, then runs
//! Dykstra-corrected alternating projections between the remaining affine
//! subspace and the product of (shifted) cones. Every returned certificate
//! is re-validated against the original constraints by fresh eigenvalue
//! checks; the projection loop is never trusted as its own judge.

mod solver;

pub use solver::{solve, InfeasibilityReport, LmiOutcome, LmiSolution, SolverOpts};

use crate::numerics::{definiteness, Mat, NumericsError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LmiError {
    #[error("constraint {index} is not symmetric-valued (asymmetry {asymmetry:.3e})")]
    NotSymmetricValued { index: usize, asymmetry: f64 },
    #[error("term shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarShape {
    /// n x n, X = Xᵀ enforced structurally
    Symmetric(usize),
    Rectangular(usize, usize),
}

impl VarShape {
    pub fn rows(&self) -> usize {
        match *self {
            VarShape::Symmetric(n) => n,
            VarShape::Rectangular(r, _) => r,
        }
    }
    pub fn cols(&self) -> usize {
        match *self {
            VarShape::Symmetric(n) => n,
            VarShape::Rectangular(_, c) => c,
        }
    }
    /// number of free scalar parameters
    pub fn dof(&self) -> usize {
        match *self {
            VarShape::Symmetric(n) => n * (n + 1) / 2,
            VarShape::Rectangular(r, c) => r * c,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Variable {
    pub name: String,
    pub shape: VarShape,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VarId(pub(crate) usize);

/// One summand left · X · right (or left · Xᵀ · right).
#[derive(Clone, Debug)]
pub struct Term {
    pub var: VarId,
    pub left: Mat,
    pub right: Mat,
    pub transpose_var: bool,
}

/// constant + Σ terms, a matrix-valued affine function of the variables.
#[derive(Clone, Debug)]
pub struct AffineExpr {
    rows: usize,
    cols: usize,
    constant: Mat,
    terms: Vec<Term>,
}

impl AffineExpr {
    pub fn zero(rows: usize, cols: usize) -> Self {
        AffineExpr {
            rows,
            cols,
            constant: Mat::zeros(rows, cols),
            terms: Vec::new(),
        }
    }

    pub fn constant(c: Mat) -> Self {
        AffineExpr {
            rows: c.rows(),
            cols: c.cols(),
            constant: c,
            terms: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn constant_part(&self) -> &Mat {
        &self.constant
    }

    pub fn add_constant(&mut self, c: &Mat) {
        self.constant = &self.constant + c;
    }

    /// Append a term left · X · right; shapes are checked against the
    /// variable now so misuse fails at build time, not solve time.
    pub fn push_term(
        &mut self,
        vars: &[Variable],
        var: VarId,
        left: Mat,
        right: Mat,
        transpose_var: bool,
    ) -> Result<(), LmiError> {
        let shape = vars[var.0].shape;
        let (xr, xc) = if transpose_var {
            (shape.cols(), shape.rows())
        } else {
            (shape.rows(), shape.cols())
        };
        if left.cols() != xr || right.rows() != xc {
            return Err(LmiError::Shape(format!(
                "term around variable '{}': left is {}x{}, right is {}x{}, inner matrix is {}x{}",
                vars[var.0].name,
                left.rows(),
                left.cols(),
                right.rows(),
                right.cols(),
                xr,
                xc
            )));
        }
        if left.rows() != self.rows || right.cols() != self.cols {
            return Err(LmiError::Shape(format!(
                "term around variable '{}' produces {}x{}, expression is {}x{}",
                vars[var.0].name,
                left.rows(),
                right.cols(),
                self.rows,
                self.cols
            )));
        }
        self.terms.push(Term {
            var,
            left,
            right,
            transpose_var,
        });
        Ok(())
    }

    pub fn eval(&self, values: &[Mat]) -> Mat {
        let mut out = self.constant.clone();
        for t in &self.terms {
            out = &out + &self.eval_term(t, values);
        }
        out
    }

    /// terms only, constant omitted
    pub fn eval_linear(&self, values: &[Mat]) -> Mat {
        let mut out = Mat::zeros(self.rows, self.cols);
        for t in &self.terms {
            out = &out + &self.eval_term(t, values);
        }
        out
    }

    fn eval_term(&self, t: &Term, values: &[Mat]) -> Mat {
        let x = &values[t.var.0];
        if t.transpose_var {
            &(&t.left * &x.transpose()) * &t.right
        } else {
            &(&t.left * x) * &t.right
        }
    }
}

/// Cone membership required of a symmetric expression. Margins are
/// absolute: `PdMargin(d)` means the expression minus d·I must be PSD.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sense {
    Psd,
    Nsd,
    PdMargin(f64),
    NdMargin(f64),
}

impl Sense {
    /// lower/upper eigenvalue clip used by the cone projection
    pub(crate) fn clip(&self, lambda: f64, inflate: f64) -> f64 {
        match *self {
            Sense::Psd => lambda.max(0.0),
            Sense::Nsd => lambda.min(0.0),
            Sense::PdMargin(d) => lambda.max(d * inflate),
            Sense::NdMargin(d) => lambda.min(-d * inflate),
        }
    }
}

#[derive(Clone, Debug)]
pub enum Constraint {
    /// expression must vanish entrywise
    EqualZero(AffineExpr),
    /// expression must lie in the given cone
    Cone(AffineExpr, Sense),
}

/// An LMI feasibility problem over named matrix variables.
#[derive(Clone, Debug, Default)]
pub struct LmiProblem {
    pub(crate) vars: Vec<Variable>,
    pub(crate) constraints: Vec<Constraint>,
}

impl LmiProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_symmetric(&mut self, name: &str, n: usize) -> VarId {
        self.vars.push(Variable {
            name: name.to_string(),
            shape: VarShape::Symmetric(n),
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_rectangular(&mut self, name: &str, rows: usize, cols: usize) -> VarId {
        self.vars.push(Variable {
            name: name.to_string(),
            shape: VarShape::Rectangular(rows, cols),
        });
        VarId(self.vars.len() - 1)
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn require_zero(&mut self, expr: AffineExpr) {
        self.constraints.push(Constraint::EqualZero(expr));
    }

    pub fn require(&mut self, expr: AffineExpr, sense: Sense) {
        self.constraints.push(Constraint::Cone(expr, sense));
    }

    pub fn solve(&self, opts: &SolverOpts) -> Result<LmiOutcome, LmiError> {
        solver::solve(self, opts)
    }

    /// Check a candidate assignment against every original constraint.
    /// Strict margins are accepted with up to half the margin lost, which
    /// absorbs the asymptotic tail of the projection iteration without
    /// accepting boundary points as strict.
    pub fn validate(&self, values: &[Mat], opts: &SolverOpts) -> Result<Validation, LmiError> {
        let mut checks = Vec::with_capacity(self.constraints.len());
        let mut ok = true;
        for (index, c) in self.constraints.iter().enumerate() {
            let check = match c {
                Constraint::EqualZero(expr) => {
                    let val = expr.eval(values);
                    let scale = 1.0 + expr.constant_part().frobenius_norm();
                    let residual = val.frobenius_norm();
                    ConstraintCheck {
                        index,
                        kind: "equality".into(),
                        satisfied: residual <= opts.eq_tol * scale,
                        margin: -residual,
                    }
                }
                Constraint::Cone(expr, sense) => {
                    let val = expr.eval(values);
                    let scale = 1.0 + val.frobenius_norm();
                    let asym = val.asymmetry_norm();
                    if asym > 1e-7 * scale {
                        return Err(LmiError::NotSymmetricValued {
                            index,
                            asymmetry: asym,
                        });
                    }
                    let report = definiteness(&val.symmetrize(), 0.0)?;
                    let slack = opts.cone_tol * scale;
                    let (satisfied, margin) = match *sense {
                        Sense::Psd => (report.min_eig >= -slack, report.min_eig),
                        Sense::Nsd => (report.max_eig <= slack, -report.max_eig),
                        Sense::PdMargin(d) => {
                            (report.min_eig >= 0.5 * d, report.min_eig)
                        }
                        Sense::NdMargin(d) => {
                            (report.max_eig <= -0.5 * d, -report.max_eig)
                        }
                    };
                    ConstraintCheck {
                        index,
                        kind: "cone".into(),
                        satisfied,
                        margin,
                    }
                }
            };
            ok &= check.satisfied;
            checks.push(check);
        }
        Ok(Validation { ok, checks })
    }
}

#[derive(Clone, Debug)]
pub struct ConstraintCheck {
    pub index: usize,
    pub kind: String,
    pub satisfied: bool,
    /// distance into the feasible side: eigenvalue margin for cones,
    /// negated residual for equalities
    pub margin: f64,
}

#[derive(Clone, Debug)]
pub struct Validation {
    pub ok: bool,
    pub checks: Vec<ConstraintCheck>,
}

impl Validation {
    pub fn worst_margin(&self) -> f64 {
        self.checks
            .iter()
            .map(|c| c.margin)
            .fold(f64::INFINITY, f64::min)
    }
}
