//! Dense finite-dimensional stand-ins for bounded, Hilbert–Schmidt and
//! trace-class operators.
//!
//! Singular values are obtained from the symmetric eigenproblem of `AᵀA`
//! (eigenvalues below `1e-14 · λ_max` are floored to zero), so the norms here
//! never go through a general SVD. The SVD is kept as an independent oracle in
//! the tests and in [`crate::selftest`].

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative eigenvalue floor applied to `AᵀA` before taking square roots.
const GRAM_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    entries: DMatrix<f64>,
}

impl DenseOperator {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::domain("operator must have at least one row and column"));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("operator entries must be finite"));
        }
        Ok(Self { entries })
    }

    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "DenseOperator::from_row_slice",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(rows, cols, data))
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(DMatrix::identity(n, n))
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag)))
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn transpose(&self) -> Self {
        Self { entries: self.entries.transpose() }
    }

    /// Operator composition `self · rhs`.
    pub fn compose(&self, rhs: &DenseOperator) -> Result<Self> {
        if self.cols() != rhs.rows() {
            return Err(Error::DimensionMismatch {
                context: "DenseOperator::compose",
                expected: self.cols(),
                found: rhs.rows(),
            });
        }
        Self::new(&self.entries * &rhs.entries)
    }

    /// `sqrt(Σ_ij A_ij²)`.
    pub fn hs_norm(&self) -> f64 {
        // Plain Frobenius norm; nalgebra's `norm` scales to avoid overflow.
        self.entries.norm()
    }

    pub fn trace(&self) -> Result<f64> {
        if self.rows() != self.cols() {
            return Err(Error::DimensionMismatch {
                context: "trace of a non-square operator",
                expected: self.rows(),
                found: self.cols(),
            });
        }
        Ok(self.entries.trace())
    }

    /// Singular values in decreasing order.
    pub fn singular_values(&self) -> Vec<f64> {
        // The Gram matrix of the narrower side keeps the eigenproblem small.
        let gram = if self.rows() >= self.cols() {
            self.entries.transpose() * &self.entries
        } else {
            &self.entries * self.entries.transpose()
        };
        let eig = gram.symmetric_eigenvalues();
        let max = eig.iter().cloned().fold(0.0_f64, f64::max);
        let floor = GRAM_FLOOR * max;
        let mut sv: Vec<f64> = eig
            .iter()
            .map(|&l| if l <= floor { 0.0 } else { l.sqrt() })
            .collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    }

    /// Sum of singular values.
    pub fn trace_norm(&self) -> f64 {
        self.singular_values().iter().sum()
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        self.singular_values().first().copied().unwrap_or(0.0)
    }
}
