//! Gaussian laws of the solution at a fixed time and exact expectations of
//! pairing functionals under them.
//!
//! Coordinates are interleaved per mode: `[a_1, b_1, a_2, b_2, …]`, where
//! `a` is the real and `b` the imaginary component.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// Dirichlet sine eigenbasis of the continuous Laplacian.
    ContinuousSpectral,
    /// M-orthonormal eigenbasis of the discrete Laplacian.
    DiscreteEigen,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    /// Independent 2×2 blocks, one per mode.
    BlockDiagonal(Vec<[[f64; 2]; 2]>),
    Dense(DMatrix<f64>),
}

impl Covariance {
    pub fn dim(&self) -> usize {
        match self {
            Covariance::BlockDiagonal(b) => 2 * b.len(),
            Covariance::Dense(m) => m.nrows(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            Covariance::BlockDiagonal(b) => b.iter().map(|m| m[0][0] + m[1][1]).sum(),
            Covariance::Dense(m) => m.trace(),
        }
    }

    /// `vᵀ C v`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        match self {
            Covariance::BlockDiagonal(blocks) => blocks
                .iter()
                .enumerate()
                .map(|(j, m)| {
                    let (x, y) = (v[2 * j], v[2 * j + 1]);
                    m[0][0] * x * x + (m[0][1] + m[1][0]) * x * y + m[1][1] * y * y
                })
                .sum(),
            Covariance::Dense(m) => {
                let n = m.nrows();
                let mut acc = 0.0;
                for c in 0..n {
                    let col = m.column(c);
                    let mut s = 0.0;
                    for r in 0..n {
                        s += col[r] * v[r];
                    }
                    acc += s * v[c];
                }
                acc
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Covariance::Dense(m) => m.clone(),
            Covariance::BlockDiagonal(blocks) => {
                let n = 2 * blocks.len();
                let mut m = DMatrix::zeros(n, n);
                for (j, b) in blocks.iter().enumerate() {
                    for r in 0..2 {
                        for c in 0..2 {
                            m[(2 * j + r, 2 * j + c)] = b[r][c];
                        }
                    }
                }
                m
            }
        }
    }

    pub fn max_asymmetry(&self) -> f64 {
        match self {
            Covariance::BlockDiagonal(b) => b.iter().map(|m| (m[0][1] - m[1][0]).abs()).fold(0.0, f64::max),
            Covariance::Dense(m) => (m - m.transpose()).amax(),
        }
    }

    /// Smallest eigenvalue of the (symmetrised) covariance.
    pub fn min_eigenvalue(&self) -> f64 {
        match self {
            Covariance::BlockDiagonal(blocks) => blocks
                .iter()
                .map(|m| {
                    let off = 0.5 * (m[0][1] + m[1][0]);
                    let mean = 0.5 * (m[0][0] + m[1][1]);
                    let half = 0.5 * (m[0][0] - m[1][1]);
                    mean - (half * half + off * off).sqrt()
                })
                .fold(f64::INFINITY, f64::min),
            Covariance::Dense(m) => {
                let sym = (m + m.transpose()) * 0.5;
                sym.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Symmetric to `1e-12` (relative to the largest entry) and eigenvalues
    /// no lower than `−1e-12 · trace`.
    pub fn is_valid_psd(&self) -> bool {
        let scale = match self {
            Covariance::BlockDiagonal(b) => b.iter().flat_map(|m| m.iter().flatten()).fold(0.0_f64, |a, x| a.max(x.abs())),
            Covariance::Dense(m) => m.amax(),
        };
        self.max_asymmetry() <= 1e-12 * scale.max(1.0) && self.min_eigenvalue() >= -1e-12 * self.trace().abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLaw {
    pub basis: Basis,
    pub mean: Vec<f64>,
    pub cov: Covariance,
}

impl GaussianLaw {
    pub fn new(basis: Basis, mean: Vec<f64>, cov: Covariance) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch {
                context: "GaussianLaw mean vs covariance",
                expected: cov.dim(),
                found: mean.len(),
            });
        }
        Ok(Self { basis, mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `E|||X|||² = ‖m‖² + Tr C`.
    pub fn second_moment(&self) -> f64 {
        self.mean.iter().map(|x| x * x).sum::<f64>() + self.cov.trace()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionalKind {
    /// `E cos((X, v))`.
    CosPairing,
    /// `E (X, v)`.
    LinearPairing,
    /// `E |||X|||²`; the direction is ignored.
    SquaredNorm,
}

pub fn gaussian_functional(law: &GaussianLaw, v: &[f64], kind: FunctionalKind) -> Result<f64> {
    if kind != FunctionalKind::SquaredNorm && v.len() != law.dim() {
        return Err(Error::DimensionMismatch {
            context: "gaussian_functional direction",
            expected: law.dim(),
            found: v.len(),
        });
    }
    Ok(match kind {
        FunctionalKind::CosPairing => {
            let m: f64 = law.mean.iter().zip(v).map(|(a, b)| a * b).sum();
            m.cos() * (-0.5 * law.cov.quadratic_form(v)).exp()
        }
        FunctionalKind::LinearPairing => law.mean.iter().zip(v).map(|(a, b)| a * b).sum(),
        FunctionalKind::SquaredNorm => law.second_moment(),
    })
}
