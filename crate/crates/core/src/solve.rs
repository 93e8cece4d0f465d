//! Dense direct solvers and evaluation of discrete solutions.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mesh::Point2;
use crate::space::HpSpace;

/// Which factorization to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// LU with partial pivoting, for the non-symmetric DG system.
    Lu,
    /// Cholesky, for the symmetric positive definite conforming system.
    Cholesky,
}

/// Below this pivot ratio the LU factorization is declared singular.
const RCOND_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct Solution {
    pub coefficients: DVector<f64>,
    /// `‖A c − rhs‖ / ‖rhs‖`.
    pub residual_norm: f64,
    pub solver: SolverKind,
}

fn check_dims(a: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<()> {
    if !a.is_square() || a.nrows() != rhs.len() {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}×{}, right-hand side has {} entries",
            a.nrows(),
            a.ncols(),
            rhs.len()
        )));
    }
    Ok(())
}

/// Solves `A c = rhs` and records the relative residual.
pub fn solve_dense(a: &DMatrix<f64>, rhs: &DVector<f64>, kind: SolverKind) -> Result<Solution> {
    check_dims(a, rhs)?;
    let coefficients = match kind {
        SolverKind::Lu => {
            let lu = a.clone().lu();
            let u = lu.u();
            let diag = u.diagonal().abs();
            let (lo, hi) = (diag.min(), diag.max());
            let rcond = if hi > 0.0 { lo / hi } else { 0.0 };
            if !(rcond > RCOND_FLOOR) {
                return Err(Error::Singular { rcond });
            }
            lu.solve(rhs).ok_or(Error::Singular { rcond })?
        }
        SolverKind::Cholesky => a.clone().cholesky().ok_or(Error::NotPositiveDefinite)?.solve(rhs),
    };
    let bnorm = rhs.norm();
    let residual = (a * &coefficients - rhs).norm();
    let residual_norm = if bnorm > 0.0 { residual / bnorm } else { residual };
    Ok(Solution {
        coefficients,
        residual_norm,
        solver: kind,
    })
}

/// A discrete function: coefficients in a space.
#[derive(Debug, Clone)]
pub struct FieldView {
    pub space: Arc<HpSpace>,
    pub coefficients: DVector<f64>,
}

impl FieldView {
    pub fn new(space: Arc<HpSpace>, coefficients: DVector<f64>) -> Result<Self> {
        if coefficients.len() != space.total_dofs() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for a space with {} dofs",
                coefficients.len(),
                space.total_dofs()
            )));
        }
        Ok(FieldView { space, coefficients })
    }

    /// Value at a screen point, taken from the lowest-numbered panel containing it.
    pub fn value_at(&self, x: Point2) -> Result<f64> {
        let mesh = self.space.mesh();
        let q = *mesh
            .locate(x)
            .first()
            .ok_or_else(|| Error::InvalidConfig(format!("point {x:?} is outside the screen")))?;
        Ok(self.value_on_panel(q, x))
    }

    /// Value of the restriction to panel `q` at a point of its closure.
    pub fn value_on_panel(&self, q: usize, x: Point2) -> f64 {
        let r = self.space.mesh().panel_inverse_map(q, x);
        self.space.eval_panel(q, r, &self.coefficients)
    }

    pub fn jump_at(&self, e: usize, s: f64) -> f64 {
        self.space.jump_at(e, s, &self.coefficients)
    }

    /// `‖[u]‖_{L²(γ_h)}` over all edges, boundary edges contributing their traces.
    pub fn jump_l2(&self) -> f64 {
        self.skeleton_l2(|_| true)
    }

    /// `‖u‖_{L²(∂Γ)}`.
    pub fn boundary_trace_l2(&self) -> f64 {
        self.skeleton_l2(|boundary| boundary)
    }

    fn skeleton_l2(&self, include: impl Fn(bool) -> bool) -> f64 {
        let mesh = self.space.mesh();
        let rule = crate::gauss::gauss_legendre(self.space.max_degree() + 2);
        let mut acc = 0.0;
        for (e, edge) in mesh.edges.iter().enumerate() {
            if !include(edge.is_boundary) {
                continue;
            }
            let len = mesh.edge_length(e);
            for (s, w) in rule.iter() {
                let j = self.jump_at(e, s);
                acc += w * len * j * j;
            }
        }
        acc.sqrt()
    }
}

/// Value of a discrete solution at a screen point.
pub fn evaluate_solution(space: &Arc<HpSpace>, solution: &Solution, x: Point2) -> Result<f64> {
    FieldView::new(space.clone(), solution.coefficients.clone())?.value_at(x)
}
