//! Exact solution machinery on the unit interval.
//!
//! The Dirichlet Laplacian on `(0, 1)` has eigenpairs `λ_j = (jπ)²`,
//! `φ_j(x) = √2 sin(jπx)`. A state `X = (u₁, u₂)` is held as its truncated
//! sine coefficients, and the group `E(t)` acts on mode `j` as a rotation by
//! the angle `tλ_j`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::law::{Basis, Covariance, GaussianLaw};
use crate::noise::CovarianceSpec;
use crate::quad::{composite_rule, integrate};

pub fn dirichlet_eigenvalue(j: usize) -> f64 {
    let w = j as f64 * PI;
    w * w
}

pub fn sine_mode(j: usize, x: f64) -> f64 {
    std::f64::consts::SQRT_2 * (j as f64 * PI * x).sin()
}

/// Truncated Dirichlet eigensystem on `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem1D {
    lambdas: Vec<f64>,
}

impl EigenSystem1D {
    /// Builds the first `modes` eigenpairs and checks `∫φ_jφ_k = δ_jk` by
    /// quadrature for `j, k ≤ min(modes, 20)`.
    pub fn new(modes: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::domain("truncation level J must be at least 1"));
        }
        let check = modes.min(20);
        let rule = composite_rule(0.0, 1.0, 2 * check, 12);
        for j in 1..=check {
            for k in j..=check {
                let ip = integrate(&rule, |x| sine_mode(j, x) * sine_mode(k, x));
                let expected = if j == k { 1.0 } else { 0.0 };
                if (ip - expected).abs() > 1e-12 {
                    return Err(Error::domain(format!("eigenfunctions {j}, {k} fail orthonormality: {ip:e}")));
                }
            }
        }
        Ok(Self { lambdas: (1..=modes).map(dirichlet_eigenvalue).collect() })
    }

    pub fn modes(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn eval(&self, j: usize, x: f64) -> f64 {
        sine_mode(j, x)
    }
}

/// Sine coefficients of the two components, `u₁ = Σ a_j φ_j`, `u₂ = Σ b_j φ_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoeffs {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl SpectralCoeffs {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch { context: "SpectralCoeffs components", expected: a.len(), found: b.len() });
        }
        if a.is_empty() {
            return Err(Error::domain("SpectralCoeffs needs at least one mode"));
        }
        if a.iter().chain(&b).any(|x| !x.is_finite()) {
            return Err(Error::domain("SpectralCoeffs entries must be finite"));
        }
        Ok(Self { a, b })
    }

    pub fn zeros(modes: usize) -> Self {
        Self { a: vec![0.0; modes], b: vec![0.0; modes] }
    }

    /// Real-valued data `u₁ = Σ a_j φ_j`, `u₂ = 0`.
    pub fn real(a: Vec<f64>) -> Result<Self> {
        let n = a.len();
        Self::new(a, vec![0.0; n])
    }

    pub fn modes(&self) -> usize {
        self.a.len()
    }

    /// `|||X|||` in `H = L² × L²`.
    pub fn norm(&self) -> f64 {
        self.a.iter().chain(&self.b).map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `[a_1, b_1, a_2, b_2, …]`.
    pub fn interleaved(&self) -> Vec<f64> {
        self.a.iter().zip(&self.b).flat_map(|(&x, &y)| [x, y]).collect()
    }

    pub fn from_interleaved(v: &[f64]) -> Result<Self> {
        if v.len() % 2 != 0 {
            return Err(Error::domain("interleaved coefficient vector must have even length"));
        }
        Self::new(v.iter().step_by(2).copied().collect(), v.iter().skip(1).step_by(2).copied().collect())
    }
}

/// `‖v‖_γ = (Σ_j λ_j^γ c_j²)^{1/2}` for one component.
pub fn hdot_norm(coeffs: &[f64], gamma: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| dirichlet_eigenvalue(i + 1).powf(gamma) * c * c)
        .sum::<f64>()
        .sqrt()
}

/// `E(t)X`; valid for negative `t` as well.
pub fn apply_group(t: f64, x: &SpectralCoeffs) -> SpectralCoeffs {
    let mut out = SpectralCoeffs::zeros(x.modes());
    for j in 0..x.modes() {
        let (s, c) = (t * dirichlet_eigenvalue(j + 1)).sin_cos();
        out.a[j] = c * x.a[j] - s * x.b[j];
        out.b[j] = s * x.a[j] + c * x.b[j];
    }
    out
}

/// Scalar initial profiles with registered closed-form sine coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialProfile {
    Zero,
    /// `x(1 − x)`.
    Parabola,
    /// `φ_j`.
    SineMode(usize),
}

impl InitialProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            InitialProfile::Zero => 0.0,
            InitialProfile::Parabola => x * (1.0 - x),
            InitialProfile::SineMode(j) => sine_mode(j, x),
        }
    }

    /// Exact `c_j = ⟨f, φ_j⟩` for `j = 1..=modes`.
    pub fn sine_coefficients(&self, modes: usize) -> Vec<f64> {
        (1..=modes)
            .map(|j| match *self {
                InitialProfile::Zero => 0.0,
                InitialProfile::Parabola => {
                    if j % 2 == 1 {
                        4.0 * std::f64::consts::SQRT_2 / (j as f64 * PI).powi(3)
                    } else {
                        0.0
                    }
                }
                InitialProfile::SineMode(k) => {
                    if j == k {
                        1.0
                    } else {
                        0.0
                    }
                }
            })
            .collect()
    }
}

/// Tolerance on the change under panel doubling in [`project_function`].
pub const PROJECTION_TOL: f64 = 1e-11;

/// `c_j = ∫₀¹ f(x) φ_j(x) dx` for `j = 1..=modes` by composite
/// Gauss–Legendre quadrature, accepted once doubling the panel count changes
/// no coefficient by more than [`PROJECTION_TOL`] (relative to `max(1, max|c|)`).
pub fn project_function<F: Fn(f64) -> f64>(f: F, modes: usize) -> Result<Vec<f64>> {
    if modes == 0 {
        return Err(Error::domain("truncation level J must be at least 1"));
    }
    let coeffs_with = |panels: usize| -> Vec<f64> {
        let rule = composite_rule(0.0, 1.0, panels, 12);
        let samples: Vec<(f64, f64)> = rule.iter().map(|&(x, w)| (x, w * f(x))).collect();
        (1..=modes)
            .map(|j| samples.iter().map(|&(x, wf)| wf * sine_mode(j, x)).sum())
            .collect()
    };
    let mut panels = (modes / 2).max(8);
    let mut coarse = coeffs_with(panels);
    let mut achieved = f64::INFINITY;
    for _ in 0..6 {
        panels *= 2;
        let fine = coeffs_with(panels);
        let scale = fine.iter().fold(1.0_f64, |m, c| m.max(c.abs()));
        achieved = coarse.iter().zip(&fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
        if achieved <= PROJECTION_TOL {
            return Ok(fine);
        }
        coarse = fine;
    }
    Err(Error::Quadrature { achieved, requested: PROJECTION_TOL })
}

/// Exact law of `X(T) = E(T)X₀ + ∫₀ᵀ E(T−τ) dW(τ)` in the truncated sine basis.
pub fn stochastic_convolution_law(t: f64, spec: &CovarianceSpec, x0: &SpectralCoeffs) -> Result<GaussianLaw> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("final time must be nonnegative, got {t}")));
    }
    if spec.modes() != x0.modes() {
        return Err(Error::DimensionMismatch {
            context: "stochastic_convolution_law truncation",
            expected: spec.modes(),
            found: x0.modes(),
        });
    }
    let mean = apply_group(t, x0).interleaved();
    let blocks = (0..spec.modes())
        .map(|j| {
            let lambda = dirichlet_eigenvalue(j + 1);
            let (q1, q2) = (spec.q1()[j], spec.q2()[j]);
            let s2 = (2.0 * lambda * t).sin() / (4.0 * lambda);
            let cos2 = 0.5 * t + s2;
            let sin2 = 0.5 * t - s2;
            let sc = {
                let s = (lambda * t).sin();
                // (1 − cos 2λT)/(4λ) = sin²(λT)/(2λ)
                s * s / (2.0 * lambda)
            };
            let off = (q1 - q2) * sc;
            [[q1 * cos2 + q2 * sin2, off], [off, q1 * sin2 + q2 * cos2]]
        })
        .collect();
    GaussianLaw::new(Basis::ContinuousSpectral, mean, Covariance::BlockDiagonal(blocks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::{gaussian_functional, FunctionalKind};
    use crate::noise::KeyedNormal;

    fn random_coeffs(modes: usize, stream: u64) -> SpectralCoeffs {
        let g = KeyedNormal::new(11, stream);
        let v: Vec<f64> = (0..2 * modes).map(|i| g.normal(i as u64) / (1.0 + i as f64)).collect();
        SpectralCoeffs::from_interleaved(&v).unwrap()
    }

    #[test]
    fn eigensystem_basics() {
        let e = EigenSystem1D::new(64).unwrap();
        assert!((e.lambdas()[0] - PI * PI).abs() < 1e-15);
        assert!(e.lambdas().windows(2).all(|w| w[1] > w[0]));
        assert!(EigenSystem1D::new(0).is_err());
    }

    #[test]
    fn hdot_norm_examples() {
        let mut c = vec![0.0; 5];
        c[0] = 1.0;
        assert!((hdot_norm(&c, 2.0) - PI * PI).abs() < 1e-12);
        let c = [0.3, -1.2, 0.5];
        let euclid = c.iter().map(|x: &f64| x * x).sum::<f64>().sqrt();
        assert!((hdot_norm(&c, 0.0) - euclid).abs() < 1e-15);
    }

    #[test]
    fn parabola_norm_matches_quadrature() {
        let c = InitialProfile::Parabola.sine_coefficients(512);
        let exact = 1.0_f64 / 30.0;
        let oracle = integrate(&composite_rule(0.0, 1.0, 4, 8), |x| (x * (1.0 - x)).powi(2));
        assert!((oracle - exact).abs() < 1e-15);
        assert!((hdot_norm(&c, 0.0) - oracle.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn group_identity_and_quarter_turn() {
        let x = random_coeffs(16, 1);
        assert_eq!(apply_group(0.0, &x), x);
        let j = 3;
        let mut a = vec![0.0; 4];
        a[j - 1] = 1.0;
        let y = apply_group(0.5 * PI / dirichlet_eigenvalue(j), &SpectralCoeffs::real(a).unwrap());
        assert!(y.a[j - 1].abs() < 1e-15 && (y.b[j - 1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn group_law_on_random_inputs() {
        let x = random_coeffs(32, 2);
        for &(s, t) in &[(0.1, 0.37), (-1.3, 0.2), (2.0, -2.0)] {
            let lhs = apply_group(t, &apply_group(s, &x));
            let rhs = apply_group(t + s, &x);
            for (p, q) in lhs.interleaved().iter().zip(rhs.interleaved()) {
                assert!((p - q).abs() < 1e-12);
            }
            assert!((apply_group(t, &x).norm() - x.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_examples() {
        let c = project_function(|x| sine_mode(3, x), 16).unwrap();
        for (i, v) in c.iter().enumerate() {
            let e = if i == 2 { 1.0 } else { 0.0 };
            assert!((v - e).abs() < 1e-10);
        }
        let c = project_function(|x| x * (1.0 - x), 64).unwrap();
        let closed = InitialProfile::Parabola.sine_coefficients(64);
        for (p, q) in c.iter().zip(&closed) {
            assert!((p - q).abs() < 1e-12);
        }
        assert!(project_function(|_| 0.0, 8).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn projection_reports_non_convergence() {
        // A jump at an irrational point keeps the panel-doubling change near 1e-6.
        let err = project_function(|x| if x < 1.0 / std::f64::consts::E { 1.0 } else { 0.0 }, 8).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }));
    }

    #[test]
    fn isotropic_noise_gives_scaled_identity_blocks() {
        let spec = CovarianceSpec::new(8, 0.5, 0.8, 1.0, 1.0).unwrap();
        let x0 = random_coeffs(8, 3);
        let law = stochastic_convolution_law(0.7, &spec, &x0).unwrap();
        if let Covariance::BlockDiagonal(b) = &law.cov {
            for (j, m) in b.iter().enumerate() {
                let q = spec.q1()[j] * 0.7;
                assert!((m[0][0] - q).abs() < 1e-15 * q.max(1e-300) * 10.0);
                assert!((m[1][1] - q).abs() < 1e-15 * q * 10.0);
                assert!(m[0][1].abs() < 1e-18);
            }
        } else {
            panic!("continuous law must be block diagonal");
        }
    }

    #[test]
    fn zero_time_law() {
        let spec = CovarianceSpec::new(8, 1.0, 1.3, 1.0, 2.0).unwrap();
        let x0 = random_coeffs(8, 4);
        let law = stochastic_convolution_law(0.0, &spec, &x0).unwrap();
        assert_eq!(law.mean, x0.interleaved());
        assert_eq!(law.cov.trace(), 0.0);
        assert!(stochastic_convolution_law(-1.0, &spec, &x0).is_err());
    }

    #[test]
    fn anisotropic_block_matches_simpson_quadrature() {
        let spec = CovarianceSpec::new(2, 0.5, 0.8, 1.7, 0.4).unwrap();
        let x0 = SpectralCoeffs::zeros(2);
        let t = 1.0;
        let law = stochastic_convolution_law(t, &spec, &x0).unwrap();
        let blocks = match &law.cov {
            Covariance::BlockDiagonal(b) => b.clone(),
            _ => unreachable!(),
        };
        for j in 0..2 {
            let lambda = dirichlet_eigenvalue(j + 1);
            let (q1, q2) = (spec.q1()[j], spec.q2()[j]);
            let n = 100_000;
            let h = t / n as f64;
            let mut acc = [[0.0; 2]; 2];
            for i in 0..=n {
                let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                let (s, c) = (i as f64 * h * lambda).sin_cos();
                let f = [[c * c * q1 + s * s * q2, c * s * (q1 - q2)], [c * s * (q1 - q2), s * s * q1 + c * c * q2]];
                for r in 0..2 {
                    for k in 0..2 {
                        acc[r][k] += w * f[r][k];
                    }
                }
            }
            for r in 0..2 {
                for k in 0..2 {
                    assert!((acc[r][k] * h / 3.0 - blocks[j][r][k]).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn squared_norm_identity() {
        let spec = CovarianceSpec::new(64, 1.0, 1.3, 1.0, 0.5).unwrap();
        let x0 = SpectralCoeffs::real(InitialProfile::Parabola.sine_coefficients(64)).unwrap();
        for &t in &[0.0, 0.3, 1.0, 4.0] {
            let law = stochastic_convolution_law(t, &spec, &x0).unwrap();
            let e = gaussian_functional(&law, &[], FunctionalKind::SquaredNorm).unwrap();
            let expected = x0.norm().powi(2) + t * spec.trace_q();
            assert!((e - expected).abs() < 1e-10, "t = {t}");
            assert!((law.cov.to_dense().trace() - t * spec.trace_q()).abs() < 1e-12);
            assert!(law.cov.is_valid_psd());
        }
    }
}
