//! Convex quadratic programming.
//!
//! Problems have the form
//!
//! ```text
//! minimize    ½ xᵀ P x + qᵀ x + offset
//! subject to  row_lower ≤ A x ≤ row_upper
//!             col_lower ≤ x   ≤ col_upper
//! ```
//!
//! with `P` positive semidefinite and stored as its upper triangle. Infinite
//! bounds are written as `±f64::INFINITY`. The solver is a primal-dual
//! interior-point method (Mehrotra predictor-corrector) on a presolved and
//! equilibrated copy of the problem; every Newton system is solved with a
//! sparse LDLᵀ factorization of the quasi-definite KKT matrix plus iterative
//! refinement.

mod ipm;
pub mod ldl;
pub mod ordering;
mod presolve;
pub mod sparse;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use sparse::{CscMatrix, TripletBuilder};

/// Bounds at or beyond this magnitude are treated as infinite.
pub const INF_BOUND: f64 = 1e20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadProgram {
    /// Upper triangle of the symmetric quadratic term.
    pub p: CscMatrix,
    pub q: Vec<f64>,
    pub offset: f64,
    pub a: CscMatrix,
    pub row_lower: Vec<f64>,
    pub row_upper: Vec<f64>,
    pub col_lower: Vec<f64>,
    pub col_upper: Vec<f64>,
}

impl QuadProgram {
    pub fn num_vars(&self) -> usize {
        self.q.len()
    }

    pub fn num_rows(&self) -> usize {
        self.row_lower.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let mut px = alloc::vec![0.0; x.len()];
        self.p.sym_upper_mul_add(x, &mut px);
        let quad: f64 = px.iter().zip(x).map(|(a, b)| a * b).sum();
        let lin: f64 = self.q.iter().zip(x).map(|(a, b)| a * b).sum();
        0.5 * quad + lin + self.offset
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &xj) in x.iter().enumerate() {
            worst = worst.max(self.col_lower[j] - xj).max(xj - self.col_upper[j]);
        }
        let mut ax = alloc::vec![0.0; self.num_rows()];
        self.a.mul_add(x, &mut ax);
        for (i, &v) in ax.iter().enumerate() {
            worst = worst.max(self.row_lower[i] - v).max(v - self.row_upper[i]);
        }
        worst
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let m = self.num_rows();
        if self.p.nrows != n || self.p.ncols != n {
            return Err(Error::Dimension("quadratic term must be n x n"));
        }
        if self.a.ncols != n || self.a.nrows != m {
            return Err(Error::Dimension("constraint matrix must be m x n"));
        }
        if self.row_upper.len() != m || self.col_lower.len() != n || self.col_upper.len() != n {
            return Err(Error::Dimension("bound vectors do not match problem size"));
        }
        if self.p.triplets().any(|(i, j, _)| i > j) {
            return Err(Error::Dimension("quadratic term must be upper triangular"));
        }
        if self
            .q
            .iter()
            .chain(self.p.values.iter())
            .chain(self.a.values.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("problem data"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpSettings {
    /// Relative tolerance on primal residual, dual residual and gap.
    pub tolerance: f64,
    pub max_iter: usize,
    /// Ruiz equilibration passes.
    pub scaling_passes: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iter: 200,
            scaling_passes: 15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    IterLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpSolution {
    pub status: QpStatus,
    pub x: Vec<f64>,
    /// Row multipliers (sign convention: `∇f = Aᵀ y + bound multipliers`).
    pub y: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Max absolute bound/row violation of `x` in original units. For an
    /// infeasible status this is the certificate residual.
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// Solve a convex QP.
pub fn solve(qp: &QuadProgram, settings: &QpSettings) -> Result<QpSolution> {
    qp.validate()?;
    let reduced = match presolve::presolve(qp) {
        Ok(r) => r,
        Err(presolve::Infeasible { residual }) => {
            return Ok(QpSolution {
                status: QpStatus::Infeasible,
                x: clamp_to_bounds(qp),
                y: alloc::vec![0.0; qp.num_rows()],
                objective: f64::NAN,
                iterations: 0,
                primal_residual: residual,
                dual_residual: 0.0,
            })
        }
    };
    let inner = ipm::solve(&reduced.problem, settings);
    let x = reduced.restore_x(&inner.x);
    let y = reduced.restore_y(&inner.y, qp.num_rows());
    let violation = qp.max_violation(&x);
    let objective = qp.objective(&x);
    Ok(QpSolution {
        status: inner.status,
        x,
        y,
        objective,
        iterations: inner.iterations,
        primal_residual: if inner.status == QpStatus::Infeasible {
            inner.primal_residual.max(violation)
        } else {
            violation
        },
        dual_residual: inner.dual_residual,
    })
}

fn clamp_to_bounds(qp: &QuadProgram) -> Vec<f64> {
    qp.col_lower
        .iter()
        .zip(&qp.col_upper)
        .map(|(&l, &u)| {
            let v = 0.0f64.max(l);
            if v > u {
                u
            } else {
                v
            }
        })
        .collect()
}

pub(crate) fn is_finite_bound(b: f64) -> bool {
    b.abs() < INF_BOUND
}
