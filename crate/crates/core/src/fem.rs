//! Piecewise linear finite elements on a uniform mesh of `(0, 1)` with
//! homogeneous Dirichlet conditions.
//!
//! The discrete Laplacian `Λ_h` is realised by the pencil `S v = λ M v`; its
//! M-orthonormal eigenvectors give the basis in which `E_h(t)` is a
//! per-mode rotation.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::law::{Basis, Covariance, GaussianLaw};
use crate::noise::CovarianceSpec;
use crate::quad::composite_rule;
use crate::spectral::{InitialProfile, SpectralCoeffs};
use crate::timeint::{cos_cos, sin_cos, sin_sin};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mesh1D {
    interior: usize,
}

impl Mesh1D {
    pub fn new(interior: usize) -> Result<Self> {
        if interior == 0 {
            return Err(Error::domain("mesh needs at least one interior node (N >= 1)"));
        }
        Ok(Self { interior })
    }

    /// Number of interior nodes `N`.
    pub fn nodes(&self) -> usize {
        self.interior
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.interior + 1) as f64
    }

    /// `x_k = k h` for `k = 0..=N+1`.
    pub fn x(&self, k: usize) -> f64 {
        k as f64 / (self.interior + 1) as f64
    }

    /// Nodal hat function `k` (1-based).
    pub fn hat(&self, k: usize, x: f64) -> f64 {
        (1.0 - (x - self.x(k)).abs() / self.h()).max(0.0)
    }
}

/// Symmetric tridiagonal mass and stiffness matrices on the interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct FemMatrices {
    pub mass_diag: Vec<f64>,
    pub mass_off: Vec<f64>,
    pub stiff_diag: Vec<f64>,
    pub stiff_off: Vec<f64>,
}

impl FemMatrices {
    pub fn size(&self) -> usize {
        self.mass_diag.len()
    }

    fn dense(diag: &[f64], off: &[f64]) -> DMatrix<f64> {
        let n = diag.len();
        DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                diag[r]
            } else if r + 1 == c {
                off[r]
            } else if c + 1 == r {
                off[c]
            } else {
                0.0
            }
        })
    }

    pub fn mass(&self) -> DMatrix<f64> {
        Self::dense(&self.mass_diag, &self.mass_off)
    }

    pub fn stiffness(&self) -> DMatrix<f64> {
        Self::dense(&self.stiff_diag, &self.stiff_off)
    }

    pub fn mass_apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.size();
        (0..n)
            .map(|k| {
                let mut s = self.mass_diag[k] * u[k];
                if k > 0 {
                    s += self.mass_off[k - 1] * u[k - 1];
                }
                if k + 1 < n {
                    s += self.mass_off[k] * u[k + 1];
                }
                s
            })
            .collect()
    }

    /// Solves `M c = b` (Thomas algorithm; `M` is SPD and diagonally dominant).
    pub fn mass_solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.size();
        let mut c_prime = vec![0.0; n];
        let mut d_prime = vec![0.0; n];
        let mut denom = self.mass_diag[0];
        if n > 1 {
            c_prime[0] = self.mass_off[0] / denom;
        }
        d_prime[0] = b[0] / denom;
        for k in 1..n {
            denom = self.mass_diag[k] - self.mass_off[k - 1] * c_prime[k - 1];
            if k + 1 < n {
                c_prime[k] = self.mass_off[k] / denom;
            }
            d_prime[k] = (b[k] - self.mass_off[k - 1] * d_prime[k - 1]) / denom;
        }
        let mut x = d_prime;
        for k in (0..n.saturating_sub(1)).rev() {
            x[k] -= c_prime[k] * x[k + 1];
        }
        x
    }

    /// `uᵀ M u`.
    pub fn mass_norm_sq(&self, u: &[f64]) -> f64 {
        self.mass_apply(u).iter().zip(u).map(|(a, b)| a * b).sum()
    }
}

/// Element-by-element assembly of `M` and `S`, boundary nodes removed.
pub fn assemble(mesh: &Mesh1D) -> FemMatrices {
    let n = mesh.nodes();
    let h = mesh.h();
    let local_mass = [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]];
    let local_stiff = [[1.0 / h, -1.0 / h], [-1.0 / h, 1.0 / h]];
    let mut m = FemMatrices {
        mass_diag: vec![0.0; n],
        mass_off: vec![0.0; n.saturating_sub(1)],
        stiff_diag: vec![0.0; n],
        stiff_off: vec![0.0; n.saturating_sub(1)],
    };
    // Element e spans global nodes (e, e+1); interior node k maps to index k-1.
    for e in 0..=n {
        let dofs = [e.checked_sub(1), if e < n { Some(e) } else { None }];
        for (r, dr) in dofs.iter().enumerate() {
            for (c, dc) in dofs.iter().enumerate() {
                if let (Some(i), Some(j)) = (dr, dc) {
                    if i == j {
                        m.mass_diag[*i] += local_mass[r][c];
                        m.stiff_diag[*i] += local_stiff[r][c];
                    } else if i < j {
                        m.mass_off[*i] += local_mass[r][c];
                        m.stiff_off[*i] += local_stiff[r][c];
                    }
                }
            }
        }
    }
    m
}

pub fn assemble_n(nodes: usize) -> Result<FemMatrices> {
    Ok(assemble(&Mesh1D::new(nodes)?))
}

/// `∫₀¹ φ_j(x) hat_k(x) dx` in closed form,
/// `√2 · 4 sin(jπx_k) sin²(jπh/2) / (h (jπ)²)`.
pub fn sine_hat_overlap(j: usize, k: usize, mesh: &Mesh1D) -> Result<f64> {
    let n = mesh.nodes();
    if k == 0 || k > n {
        return Err(Error::Index { what: "hat function", index: k, max: n });
    }
    if j == 0 {
        return Err(Error::Index { what: "sine mode", index: j, max: usize::MAX });
    }
    Ok(overlap_unchecked(j, k, mesh))
}

#[inline]
fn overlap_unchecked(j: usize, k: usize, mesh: &Mesh1D) -> f64 {
    let period = 2 * (mesh.nodes() + 1);
    // sin(jπ k/(N+1)) with the argument reduced exactly modulo 2π.
    let phase = ((j % period) * k) % period;
    let s_node = (PI * phase as f64 / (mesh.nodes() + 1) as f64).sin();
    let half = (PI * (j % period) as f64 / period as f64).sin();
    let w = j as f64 * PI;
    SQRT_2 * 4.0 * s_node * half * half / (mesh.h() * w * w)
}

fn load_vector<F: Fn(f64) -> f64>(f: &F, mesh: &Mesh1D, panels: usize) -> Vec<f64> {
    let n = mesh.nodes();
    let h = mesh.h();
    let mut b = vec![0.0; n];
    let unit = composite_rule(0.0, 1.0, panels, 10);
    for e in 0..=n {
        let x0 = mesh.x(e);
        // Element e carries the right half of hat e and the left half of hat e+1.
        let (mut left, mut right) = (0.0, 0.0);
        for &(s, w) in &unit {
            let fx = f(x0 + s * h) * w * h;
            left += fx * (1.0 - s);
            right += fx * s;
        }
        if e >= 1 {
            b[e - 1] += left;
        }
        if e < n {
            b[e] += right;
        }
    }
    b
}

/// Tolerance on the load-vector change under sub-panel doubling in [`l2_project`].
pub const LOAD_TOL: f64 = 1e-13;

/// Nodal values of `P_h f`: solves `M c = b`, `b_k = ∫ f hat_k`.
pub fn l2_project<F: Fn(f64) -> f64>(f: F, mesh: &Mesh1D, matrices: &FemMatrices) -> Result<Vec<f64>> {
    let mut panels = 1;
    let mut coarse = load_vector(&f, mesh, panels);
    let mut achieved = f64::INFINITY;
    for _ in 0..8 {
        panels *= 2;
        let fine = load_vector(&f, mesh, panels);
        let scale = fine.iter().fold(mesh.h(), |m, v| m.max(v.abs()));
        achieved = coarse.iter().zip(&fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
        if achieved <= LOAD_TOL {
            return Ok(matrices.mass_solve(&fine));
        }
        coarse = fine;
    }
    Err(Error::Quadrature { achieved, requested: LOAD_TOL })
}

/// `P_h f` using the registered closed-form load vectors.
pub fn l2_project_profile(profile: InitialProfile, mesh: &Mesh1D, matrices: &FemMatrices) -> Vec<f64> {
    let h = mesh.h();
    let b: Vec<f64> = (1..=mesh.nodes())
        .map(|k| {
            let x = mesh.x(k);
            match profile {
                InitialProfile::Zero => 0.0,
                // ∫ hat_k x = h x_k, ∫ hat_k x² = h x_k² + h³/6
                InitialProfile::Parabola => h * x - h * x * x - h * h * h / 6.0,
                InitialProfile::SineMode(j) => overlap_unchecked(j, k, mesh),
            }
        })
        .collect();
    matrices.mass_solve(&b)
}

/// Uniform-mesh closed form `λ_{h,j} = (6/h²)(1 − cos jπh)/(2 + cos jπh)`.
pub fn uniform_discrete_eigenvalue(j: usize, mesh: &Mesh1D) -> f64 {
    let h = mesh.h();
    let c = (j as f64 * PI * h).cos();
    6.0 / (h * h) * (1.0 - c) / (2.0 + c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteEigenSystem {
    pub lambdas: Vec<f64>,
    /// Columns are M-orthonormal eigenvectors in nodal coordinates.
    pub vectors: DMatrix<f64>,
    /// `Vᵀ M`: maps nodal values to eigen-coefficients.
    analysis: DMatrix<f64>,
}

impl DiscreteEigenSystem {
    pub fn modes(&self) -> usize {
        self.lambdas.len()
    }

    pub fn coefficients(&self, nodal: &[f64]) -> Vec<f64> {
        (&self.analysis * nalgebra::DVector::from_column_slice(nodal)).iter().copied().collect()
    }

    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        (&self.vectors * nalgebra::DVector::from_column_slice(coeffs)).iter().copied().collect()
    }
}

/// Generalised symmetric eigen-solve of `S v = λ M v` through the Cholesky
/// factor of `M`.
pub fn discrete_eigensystem(matrices: &FemMatrices) -> Result<DiscreteEigenSystem> {
    let n = matrices.size();
    let mass = matrices.mass();
    let chol = mass.clone().cholesky().ok_or_else(|| Error::Eigen("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or_else(|| Error::Eigen("singular Cholesky factor".into()))?;
    let reduced = &l_inv * matrices.stiffness() * l_inv.transpose();
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let eig = reduced.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lambdas: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let back = l_inv.transpose();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let v = &back * eig.eigenvectors.column(i);
        // Fix the sign by the first nodal value (largest entry if it vanishes).
        let pivot = if v[0].abs() > 1e-8 * v.amax() { v[0] } else { v[v.iamax()] };
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        vectors.set_column(col, &(v * sign));
    }
    if lambdas.iter().any(|l| !l.is_finite() || *l <= 0.0) || vectors.iter().any(|x| !x.is_finite()) {
        return Err(Error::Eigen("non-finite or nonpositive eigenpairs".into()));
    }
    let analysis = vectors.transpose() * &mass;
    let defect = (&analysis * &vectors - DMatrix::<f64>::identity(n, n)).amax();
    if defect > 1e-10 {
        return Err(Error::Eigen(format!("M-orthonormality defect {defect:e}")));
    }
    Ok(DiscreteEigenSystem { lambdas, vectors, analysis })
}

/// Nodal values of the two components `(u_{h,1}, u_{h,2})`.
#[derive(Debug, Clone, PartialEq)]
pub struct FemField {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

impl FemField {
    pub fn new(u1: Vec<f64>, u2: Vec<f64>) -> Result<Self> {
        if u1.len() != u2.len() {
            return Err(Error::DimensionMismatch { context: "FemField components", expected: u1.len(), found: u2.len() });
        }
        if u1.iter().chain(&u2).any(|x| !x.is_finite()) {
            return Err(Error::domain("FemField entries must be finite"));
        }
        Ok(Self { u1, u2 })
    }

    /// `u₁ᵀMu₁ + u₂ᵀMu₂`.
    pub fn mass_norm_sq(&self, matrices: &FemMatrices) -> f64 {
        matrices.mass_norm_sq(&self.u1) + matrices.mass_norm_sq(&self.u2)
    }
}

/// `E_h(t) X_h`.
pub fn apply_discrete_group(t: f64, field: &FemField, eig: &DiscreteEigenSystem) -> FemField {
    let a = eig.coefficients(&field.u1);
    let b = eig.coefficients(&field.u2);
    let (ra, rb) = rotate_modal(t, &a, &b, &eig.lambdas);
    FemField { u1: eig.synthesize(&ra), u2: eig.synthesize(&rb) }
}

pub(crate) fn rotate_modal(t: f64, a: &[f64], b: &[f64], lambdas: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut ra = vec![0.0; a.len()];
    let mut rb = vec![0.0; a.len()];
    for i in 0..a.len() {
        let (s, c) = (t * lambdas[i]).sin_cos();
        ra[i] = c * a[i] - s * b[i];
        rb[i] = s * a[i] + c * b[i];
    }
    (ra, rb)
}

/// `g_{ij} = ⟨φ_{h,i}, φ_j⟩`, the bridge between the discrete eigenbasis and
/// the first `J` sine modes. `P_h φ_j = Σ_i g_{ij} φ_{h,i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossGram {
    g: DMatrix<f64>,
}

impl CrossGram {
    pub fn new(mesh: &Mesh1D, eig: &DiscreteEigenSystem, modes: usize) -> Self {
        let n = mesh.nodes();
        let overlaps = DMatrix::from_fn(n, modes, |k, j| overlap_unchecked(j + 1, k + 1, mesh));
        Self { g: eig.vectors.transpose() * overlaps }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn discrete_modes(&self) -> usize {
        self.g.nrows()
    }

    pub fn continuous_modes(&self) -> usize {
        self.g.ncols()
    }

    /// Discrete eigen-coefficients of `P_h Σ_j c_j φ_j`.
    pub fn project(&self, c: &[f64]) -> Vec<f64> {
        (&self.g * nalgebra::DVector::from_column_slice(c)).iter().copied().collect()
    }

    /// `‖P_h φ_j‖²` for every retained mode.
    pub fn projected_norms_sq(&self) -> Vec<f64> {
        self.g.column_iter().map(|c| c.norm_squared()).collect()
    }

    /// Maps an interleaved direction in the sine basis to the interleaved
    /// representer of the same pairing on `V_h × V_h`.
    pub fn map_direction(&self, v: &[f64]) -> Result<Vec<f64>> {
        let sc = SpectralCoeffs::from_interleaved(v)?;
        if sc.modes() != self.continuous_modes() {
            return Err(Error::DimensionMismatch {
                context: "CrossGram::map_direction",
                expected: 2 * self.continuous_modes(),
                found: v.len(),
            });
        }
        let a = self.project(&sc.a);
        let b = self.project(&sc.b);
        Ok(a.iter().zip(&b).flat_map(|(&x, &y)| [x, y]).collect())
    }

    /// Nonzero entries `(i, g_ij)` of each column, dropping entries below
    /// `drop_tol · max|g|` (exact zeros of the uniform mesh up to rounding).
    pub fn sparse_columns(&self, drop_tol: f64) -> Vec<Vec<(usize, f64)>> {
        let cut = drop_tol * self.g.amax();
        self.g
            .column_iter()
            .map(|col| col.iter().enumerate().filter(|(_, g)| g.abs() > cut).map(|(i, &g)| (i, g)).collect())
            .collect()
    }
}

/// Mesh, matrices, discrete eigensystem and cross-Gram for one resolution.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Mesh1D,
    pub matrices: FemMatrices,
    pub eig: DiscreteEigenSystem,
    pub cross: CrossGram,
}

impl Discretization {
    pub fn new(nodes: usize, modes: usize) -> Result<Self> {
        let mesh = Mesh1D::new(nodes)?;
        let matrices = assemble(&mesh);
        let eig = discrete_eigensystem(&matrices)?;
        let cross = CrossGram::new(&mesh, &eig, modes);
        Ok(Self { mesh, matrices, eig, cross })
    }

    /// `B_h X` for truncated continuous data, as a nodal field.
    pub fn project_spectral(&self, x: &SpectralCoeffs) -> Result<FemField> {
        if x.modes() != self.cross.continuous_modes() {
            return Err(Error::DimensionMismatch {
                context: "project_spectral truncation",
                expected: self.cross.continuous_modes(),
                found: x.modes(),
            });
        }
        Ok(FemField { u1: self.eig.synthesize(&self.cross.project(&x.a)), u2: self.eig.synthesize(&self.cross.project(&x.b)) })
    }
}

/// Exact law of `X_h(T) = E_h(T)X_{h,0} + ∫₀ᵀ E_h(T−τ) B_h dW(τ)` in the
/// discrete eigenbasis.
pub fn discrete_convolution_law(
    t: f64,
    spec: &CovarianceSpec,
    x_h0: &FemField,
    eig: &DiscreteEigenSystem,
    cross: &CrossGram,
) -> Result<GaussianLaw> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("final time must be nonnegative, got {t}")));
    }
    if spec.modes() != cross.continuous_modes() {
        return Err(Error::DimensionMismatch {
            context: "discrete_convolution_law truncation",
            expected: cross.continuous_modes(),
            found: spec.modes(),
        });
    }
    if x_h0.u1.len() != eig.modes() {
        return Err(Error::DimensionMismatch { context: "discrete_convolution_law initial field", expected: eig.modes(), found: x_h0.u1.len() });
    }
    let n = eig.modes();
    let (a, b) = rotate_modal(t, &eig.coefficients(&x_h0.u1), &eig.coefficients(&x_h0.u2), &eig.lambdas);
    let mean: Vec<f64> = a.iter().zip(&b).flat_map(|(&x, &y)| [x, y]).collect();

    // G_m = g diag(q_m) gᵀ
    let g = cross.matrix();
    let gram = |q: &[f64]| {
        let mut scaled = g.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= q[j];
        }
        scaled * g.transpose()
    };
    let g1 = gram(spec.q1());
    let g2 = gram(spec.q2());

    let mut cov = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for k in 0..n {
            let (la, lb) = (eig.lambdas[i], eig.lambdas[k]);
            let (p, r) = (g1[(i, k)], g2[(i, k)]);
            if p == 0.0 && r == 0.0 {
                continue;
            }
            let cc = cos_cos(la, lb, t);
            let ss = sin_sin(la, lb, t);
            let sc = sin_cos(la, lb, t);
            let cs = sin_cos(lb, la, t);
            cov[(2 * i, 2 * k)] = p * cc + r * ss;
            cov[(2 * i, 2 * k + 1)] = p * cs - r * sc;
            cov[(2 * i + 1, 2 * k)] = p * sc - r * cs;
            cov[(2 * i + 1, 2 * k + 1)] = p * ss + r * cc;
        }
    }
    GaussianLaw::new(Basis::DiscreteEigen, mean, Covariance::Dense(cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::KeyedNormal;
    use crate::quad::integrate;
    use crate::spectral::{dirichlet_eigenvalue, sine_mode};

    #[test]
    fn single_node_matrices() {
        let m = assemble_n(1).unwrap();
        assert!((m.mass_diag[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.stiff_diag[0] - 4.0).abs() < 1e-15);
        assert!(assemble_n(0).is_err());
    }

    #[test]
    fn three_nodes_match_element_quadrature() {
        let mesh = Mesh1D::new(3).unwrap();
        let m = assemble(&mesh);
        let rule = composite_rule(0.0, 1.0, 8, 6);
        for k in 1..=3 {
            let mkk = integrate(&rule, |x| mesh.hat(k, x).powi(2));
            assert!((m.mass_diag[k - 1] - mkk).abs() < 1e-14);
            assert!((m.stiff_diag[k - 1] - 8.0).abs() < 1e-14);
            if k < 3 {
                let mk = integrate(&rule, |x| mesh.hat(k, x) * mesh.hat(k + 1, x));
                assert!((m.mass_off[k - 1] - mk).abs() < 1e-14);
                assert!((m.stiff_off[k - 1] + 4.0).abs() < 1e-14);
            }
        }
        assert!((m.mass_diag[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!((m.mass_off[0] - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn mass_total_matches_hat_sum_integral() {
        for n in [1, 2, 7, 30] {
            let mesh = Mesh1D::new(n).unwrap();
            let m = assemble(&mesh);
            // ∫ (Σ hat_k)² = 1 − 2h + 2h/3
            let total: f64 = m.mass_apply(&vec![1.0; n]).iter().sum();
            assert!((total - (1.0 - 4.0 * mesh.h() / 3.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn hat_masses_sum_to_one_minus_h() {
        let mesh = Mesh1D::new(12).unwrap();
        let b = load_vector(&|_| 1.0, &mesh, 2);
        assert!((b.iter().sum::<f64>() - (1.0 - mesh.h())).abs() < 1e-14);
    }

    #[test]
    fn mass_solve_inverts_mass_apply() {
        let m = assemble_n(17).unwrap();
        let g = KeyedNormal::new(3, 0);
        let u: Vec<f64> = (0..17).map(|i| g.normal(i)).collect();
        let back = m.mass_solve(&m.mass_apply(&u));
        for (a, b) in u.iter().zip(back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn overlap_closed_form_matches_quadrature() {
        let mesh = Mesh1D::new(15).unwrap();
        for &(j, k) in &[(1, 8), (3, 2), (7, 15), (20, 9), (33, 1)] {
            let lo = mesh.x(k - 1);
            let hi = mesh.x(k + 1);
            let rule = composite_rule(lo, hi, 16, 12);
            let q = integrate(&rule, |x| sine_mode(j, x) * mesh.hat(k, x));
            assert!((sine_hat_overlap(j, k, &mesh).unwrap() - q).abs() < 1e-12, "({j},{k})");
        }
    }

    #[test]
    fn overlap_alias_midpoint_and_reflection() {
        let mesh = Mesh1D::new(15).unwrap();
        let alias = 2 * 16;
        for k in 1..=15 {
            assert!(sine_hat_overlap(alias, k, &mesh).unwrap().abs() < 1e-15);
        }
        let mid: Vec<f64> = (1..=15).map(|k| sine_hat_overlap(1, k, &mesh).unwrap()).collect();
        let peak = mid.iter().cloned().fold(f64::MIN, f64::max);
        assert!(mid[7] > 0.0 && (mid[7] - peak).abs() < 1e-15);
        for j in 1..40 {
            for k in 1..=15 {
                let l = sine_hat_overlap(j, k, &mesh).unwrap();
                let r = sine_hat_overlap(j, 16 - k, &mesh).unwrap();
                let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
                assert!((l - sign * r).abs() < 1e-14);
            }
        }
        assert!(matches!(sine_hat_overlap(1, 0, &mesh), Err(Error::Index { .. })));
        assert!(matches!(sine_hat_overlap(1, 16, &mesh), Err(Error::Index { .. })));
    }

    #[test]
    fn projection_is_identity_on_vh_and_zero_on_zero() {
        let mesh = Mesh1D::new(9).unwrap();
        let m = assemble(&mesh);
        let hat5 = l2_project(|x| mesh.hat(5, x), &mesh, &m).unwrap();
        for (k, v) in hat5.iter().enumerate() {
            let e = if k == 4 { 1.0 } else { 0.0 };
            assert!((v - e).abs() < 1e-12);
        }
        assert!(l2_project(|_| 0.0, &mesh, &m).unwrap().iter().all(|&v| v == 0.0));
        let quad = l2_project(|x| x * (1.0 - x), &mesh, &m).unwrap();
        let closed = l2_project_profile(InitialProfile::Parabola, &mesh, &m);
        for (a, b) in quad.iter().zip(closed) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    fn l2_error_of_projection(n: usize) -> f64 {
        let mesh = Mesh1D::new(n).unwrap();
        let m = assemble(&mesh);
        let c = l2_project(|x| sine_mode(1, x), &mesh, &m).unwrap();
        let rule = composite_rule(0.0, 1.0, n + 1, 8);
        let interp = |x: f64| {
            let k = ((x / mesh.h()).floor() as usize).min(n);
            let s = x / mesh.h() - k as f64;
            let left = if k >= 1 { c[k - 1] } else { 0.0 };
            let right = if k < n { c[k] } else { 0.0 };
            left * (1.0 - s) + right * s
        };
        integrate(&rule, |x| (interp(x) - sine_mode(1, x)).powi(2)).sqrt()
    }

    #[test]
    fn projection_error_decays_quadratically() {
        let ns = [15, 31, 63, 127];
        let errs: Vec<f64> = ns.iter().map(|&n| l2_error_of_projection(n)).collect();
        for w in errs.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!((rate - 2.0).abs() < 0.05, "rate {rate}");
        }
    }

    #[test]
    fn discrete_eigenvalues_match_closed_form_and_bound_continuous() {
        let d1 = discrete_eigensystem(&assemble_n(1).unwrap()).unwrap();
        assert!((d1.lambdas[0] - 12.0).abs() < 1e-12);
        assert!(d1.lambdas[0] >= PI * PI);
        for n in [7, 31, 63] {
            let mesh = Mesh1D::new(n).unwrap();
            let eig = discrete_eigensystem(&assemble(&mesh)).unwrap();
            for (i, l) in eig.lambdas.iter().enumerate() {
                let closed = uniform_discrete_eigenvalue(i + 1, &mesh);
                assert!((l - closed).abs() < 1e-10 * closed);
                assert!(*l > dirichlet_eigenvalue(i + 1));
            }
        }
    }

    #[test]
    fn first_eigenvalue_converges_at_second_order() {
        let errs: Vec<f64> = [15, 31, 63, 127]
            .iter()
            .map(|&n| {
                let mesh = Mesh1D::new(n).unwrap();
                (uniform_discrete_eigenvalue(1, &mesh) - PI * PI) / (PI * PI)
            })
            .collect();
        for w in errs.windows(2) {
            assert!(((w[0] / w[1]).log2() - 2.0).abs() < 0.02);
        }
    }

    #[test]
    fn eigenvectors_are_m_orthonormal() {
        let m = assemble_n(40).unwrap();
        let eig = discrete_eigensystem(&m).unwrap();
        let gram = eig.vectors.transpose() * m.mass() * &eig.vectors;
        assert!((gram - DMatrix::<f64>::identity(40, 40)).amax() < 1e-10);
    }

    fn random_field(n: usize, stream: u64) -> FemField {
        let g = KeyedNormal::new(5, stream);
        FemField::new((0..n).map(|i| g.normal(i as u64)).collect(), (0..n).map(|i| g.normal((n + i) as u64)).collect()).unwrap()
    }

    #[test]
    fn discrete_group_identity_isometry_and_group_law() {
        let m = assemble_n(20).unwrap();
        let eig = discrete_eigensystem(&m).unwrap();
        let x = random_field(20, 1);
        let id = apply_discrete_group(0.0, &x, &eig);
        for (a, b) in id.u1.iter().chain(&id.u2).zip(x.u1.iter().chain(&x.u2)) {
            assert!((a - b).abs() < 1e-12);
        }
        let n0 = x.mass_norm_sq(&m);
        for &(s, t) in &[(0.01, 0.2), (0.7, -0.3), (1.0, 1.0)] {
            let y = apply_discrete_group(t, &x, &eig);
            assert!((y.mass_norm_sq(&m) - n0).abs() < 1e-10 * n0);
            let lhs = apply_discrete_group(t, &apply_discrete_group(s, &x, &eig), &eig);
            let rhs = apply_discrete_group(t + s, &x, &eig);
            for (a, b) in lhs.u1.iter().chain(&lhs.u2).zip(rhs.u1.iter().chain(&rhs.u2)) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cross_gram_reproduces_projection() {
        let d = Discretization::new(15, 64).unwrap();
        let x0 = SpectralCoeffs::real(InitialProfile::SineMode(3).sine_coefficients(64)).unwrap();
        let via_gram = d.project_spectral(&x0).unwrap();
        let direct = l2_project_profile(InitialProfile::SineMode(3), &d.mesh, &d.matrices);
        for (a, b) in via_gram.u1.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-12);
        }
        // Uniform-mesh structure: g_ij vanishes unless j ≡ ±i mod 2(N+1).
        let g = d.cross.matrix();
        for i in 0..15 {
            for j in 0..64 {
                let (ii, jj) = (i + 1, j + 1);
                let aliased = (jj + ii) % 32 == 0 || (jj + 32 - ii % 32) % 32 == 0;
                if !aliased {
                    assert!(g[(i, j)].abs() < 1e-12, "g[{ii},{jj}] = {}", g[(i, j)]);
                }
            }
        }
    }

    fn simpson_cov(t: f64, spec: &CovarianceSpec, eig: &DiscreteEigenSystem, cross: &CrossGram) -> DMatrix<f64> {
        let n = eig.modes();
        let g = cross.matrix();
        let steps = 100_000;
        let h = t / steps as f64;
        let mut acc = DMatrix::zeros(2 * n, 2 * n);
        for s_idx in 0..=steps {
            let w = if s_idx == 0 || s_idx == steps { 1.0 } else if s_idx % 2 == 1 { 4.0 } else { 2.0 };
            let s = s_idx as f64 * h;
            // Columns: E_h(s) B_h e_{m,j} √q_{m,j} in interleaved coordinates.
            let mut cols = DMatrix::zeros(2 * n, 2 * spec.modes());
            for j in 0..spec.modes() {
                for i in 0..n {
                    let (sn, cs) = (s * eig.lambdas[i]).sin_cos();
                    let a = g[(i, j)] * spec.q1()[j].sqrt();
                    cols[(2 * i, 2 * j)] = cs * a;
                    cols[(2 * i + 1, 2 * j)] = sn * a;
                    let b = g[(i, j)] * spec.q2()[j].sqrt();
                    cols[(2 * i, 2 * j + 1)] = -sn * b;
                    cols[(2 * i + 1, 2 * j + 1)] = cs * b;
                }
            }
            acc += (&cols * cols.transpose()) * w;
        }
        acc * (h / 3.0)
    }

    #[test]
    fn discrete_law_matches_quadrature_single_mode() {
        let spec = CovarianceSpec::new(1, 0.5, 0.8, 1.0, 0.3).unwrap();
        let d = Discretization::new(1, 1).unwrap();
        let x0 = FemField::new(vec![0.0], vec![0.0]).unwrap();
        let law = discrete_convolution_law(1.0, &spec, &x0, &d.eig, &d.cross).unwrap();
        let oracle = simpson_cov(1.0, &spec, &d.eig, &d.cross);
        assert!((law.cov.to_dense() - oracle).amax() < 1e-8);
    }

    #[test]
    fn discrete_law_matches_quadrature_several_modes() {
        let spec = CovarianceSpec::new(6, 0.5, 0.8, 2.0, 0.5).unwrap();
        let d = Discretization::new(3, 6).unwrap();
        let x0 = FemField::new(vec![0.0; 3], vec![0.0; 3]).unwrap();
        let law = discrete_convolution_law(0.4, &spec, &x0, &d.eig, &d.cross).unwrap();
        let oracle = simpson_cov(0.4, &spec, &d.eig, &d.cross);
        assert!((law.cov.to_dense() - oracle).amax() < 1e-8);
    }

    #[test]
    fn discrete_law_zero_time_trace_and_psd() {
        let spec = CovarianceSpec::new(64, 1.0, 1.3, 1.0, 0.7).unwrap();
        let d = Discretization::new(15, 64).unwrap();
        let x0 = d.project_spectral(&SpectralCoeffs::real(InitialProfile::Parabola.sine_coefficients(64)).unwrap()).unwrap();
        let law0 = discrete_convolution_law(0.0, &spec, &x0, &d.eig, &d.cross).unwrap();
        assert_eq!(law0.cov.trace(), 0.0);
        let t = 1.0;
        let law = discrete_convolution_law(t, &spec, &x0, &d.eig, &d.cross).unwrap();
        let norms = d.cross.projected_norms_sq();
        let expected: f64 = (0..64).map(|j| (spec.q1()[j] + spec.q2()[j]) * norms[j] * t).sum();
        assert!((law.cov.trace() - expected).abs() < 1e-10);
        assert!(law.cov.is_valid_psd());
        assert!(discrete_convolution_law(-0.1, &spec, &x0, &d.eig, &d.cross).is_err());
    }
}
