//! Thin wrappers over nalgebra's Cholesky used by every predictor.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{GpError, Result};

/// Cholesky factor `L` of a symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub struct Factor {
    l: DMatrix<f64>,
}

impl Factor {
    /// Factorizes `m`; `name` identifies the matrix in the error on failure.
    pub fn new(m: DMatrix<f64>, name: &str) -> Result<Factor> {
        if m.nrows() != m.ncols() {
            return Err(GpError::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(GpError::conditioning(name));
        }
        let chol: Cholesky<f64, Dyn> = Cholesky::new(m).ok_or_else(|| GpError::conditioning(name))?;
        Ok(Factor { l: chol.unpack() })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// `L⁻¹ B`.
    pub fn half_solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        self.half_solve_mut(&mut x);
        x
    }

    pub fn half_solve_mut(&self, b: &mut DMatrix<f64>) {
        let ok = self.l.solve_lower_triangular_mut(b);
        debug_assert!(ok);
    }

    pub fn half_solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        let ok = self.l.solve_lower_triangular_mut(&mut x);
        debug_assert!(ok);
        x
    }

    /// `(L Lᵀ)⁻¹ B`, one column at a time.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        let ok = self.l.solve_lower_triangular_mut(&mut x)
            && self.l.tr_solve_lower_triangular_mut(&mut x);
        debug_assert!(ok);
        x
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        let ok = self.l.solve_lower_triangular_mut(&mut x)
            && self.l.tr_solve_lower_triangular_mut(&mut x);
        debug_assert!(ok);
        x
    }
}

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Squared norm of each column.
pub fn column_sq_norms(m: &DMatrix<f64>) -> Vec<f64> {
    m.column_iter().map(|c| c.norm_squared()).collect()
}

/// `diag(Aᵀ B)` without forming the product.
pub fn diag_of_tr_mul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    debug_assert_eq!(a.shape(), b.shape());
    a.column_iter().zip(b.column_iter()).map(|(x, y)| x.dot(&y)).collect()
}

/// `diag(A Bᵀ)` without forming the product.
pub fn diag_of_mul_tr(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    debug_assert_eq!(a.shape(), b.shape());
    a.row_iter().zip(b.row_iter()).map(|(x, y)| x.dot(&y)).collect()
}
