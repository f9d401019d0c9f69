//! Test functionals of class C_b² on the truncated state space.
//!
//! States are interleaved coefficient vectors in an orthonormal basis, so
//! the H inner product is the Euclidean dot product.

use crate::error::{Error, Result};
use crate::law::FunctionalKind;
use crate::noise::KeyedNormal;

#[derive(Debug, Clone, PartialEq)]
pub enum TestFunctional {
    /// `cos((x, v))`
    CosPairing { v: Vec<f64> },
    /// `(x, v)`
    LinearPairing { v: Vec<f64> },
    /// `exp(−|||x|||² / (2σ²))`
    GaussBump { sigma: f64 },
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl TestFunctional {
    pub fn cos_pairing(v: Vec<f64>) -> Result<Self> {
        check_direction(&v)?;
        Ok(Self::CosPairing { v })
    }

    pub fn linear_pairing(v: Vec<f64>) -> Result<Self> {
        check_direction(&v)?;
        Ok(Self::LinearPairing { v })
    }

    pub fn gauss_bump(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!("bump width must be positive and finite, got {sigma}")));
        }
        Ok(Self::GaussBump { sigma })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::CosPairing { .. } => "cos",
            Self::LinearPairing { .. } => "linear",
            Self::GaussBump { .. } => "bump",
        }
    }

    pub fn direction(&self) -> Option<&[f64]> {
        match self {
            Self::CosPairing { v } | Self::LinearPairing { v } => Some(v),
            Self::GaussBump { .. } => None,
        }
    }

    /// Kind with a closed-form Gaussian expectation, if any.
    pub fn exact_kind(&self) -> Result<FunctionalKind> {
        match self {
            Self::CosPairing { .. } => Ok(FunctionalKind::CosPairing),
            Self::LinearPairing { .. } => Ok(FunctionalKind::LinearPairing),
            Self::GaussBump { .. } => Err(Error::Unsupported("gauss-bump has no closed-form Gaussian expectation; use Monte Carlo".into())),
        }
    }

    /// Same functional with its direction replaced (e.g. mapped to the
    /// discrete eigenbasis).
    pub fn with_direction(&self, v: Vec<f64>) -> Self {
        match self {
            Self::CosPairing { .. } => Self::CosPairing { v },
            Self::LinearPairing { .. } => Self::LinearPairing { v },
            Self::GaussBump { sigma } => Self::GaussBump { sigma: *sigma },
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Self::CosPairing { v } => dot(x, v).cos(),
            Self::LinearPairing { v } => dot(x, v),
            Self::GaussBump { sigma } => (-dot(x, x) / (2.0 * sigma * sigma)).exp(),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Self::CosPairing { v } => {
                let s = -dot(x, v).sin();
                v.iter().map(|vi| s * vi).collect()
            }
            Self::LinearPairing { v } => v.clone(),
            Self::GaussBump { sigma } => {
                let c = -self.value(x) / (sigma * sigma);
                x.iter().map(|xi| c * xi).collect()
            }
        }
    }

    /// `Φ''(x) y`.
    pub fn hessian_apply(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        match self {
            Self::CosPairing { v } => {
                let c = -dot(x, v).cos() * dot(v, y);
                v.iter().map(|vi| c * vi).collect()
            }
            Self::LinearPairing { v } => vec![0.0; v.len()],
            Self::GaussBump { sigma } => {
                let s2 = sigma * sigma;
                let phi = self.value(x);
                let xy = dot(x, y);
                x.iter().zip(y).map(|(xi, yi)| phi * (-yi / s2 + xi * xy / (s2 * s2))).collect()
            }
        }
    }

    /// `sup_x |||Φ'(x)|||`.
    pub fn gradient_bound(&self) -> f64 {
        match self {
            Self::CosPairing { v } | Self::LinearPairing { v } => norm(v),
            // r e^{−r²/2σ²}/σ² peaks at r = σ
            Self::GaussBump { sigma } => (-0.5f64).exp() / sigma,
        }
    }

    /// `sup_x ‖Φ''(x)‖`.
    pub fn hessian_bound(&self) -> f64 {
        match self {
            Self::CosPairing { v } => dot(v, v),
            Self::LinearPairing { .. } => 0.0,
            // Transverse eigenvalue −Φ/σ² dominates the radial one (2s − 1)e^{−s}/σ² ≤ 2e^{−3/2}/σ².
            Self::GaussBump { sigma } => 1.0 / (sigma * sigma),
        }
    }
}

fn check_direction(v: &[f64]) -> Result<()> {
    if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("pairing direction must be nonempty and finite"));
    }
    Ok(())
}

/// Unit vector `(1/√k)(φ_1 + … + φ_k)` in the real component of a
/// `modes`-mode interleaved state.
pub fn low_pass_direction(modes: usize, support: usize) -> Vec<f64> {
    let k = support.min(modes);
    let mut v = vec![0.0; 2 * modes];
    for j in 0..k {
        v[2 * j] = 1.0 / (k as f64).sqrt();
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdCheck {
    pub grad_err: f64,
    pub hess_err: f64,
}

const FD_DIRECTIONS: usize = 8;

/// Central differences along 8 seeded unit directions `y`: `Φ` against
/// `(Φ'(x), y)`, and `Φ'` against `(Φ''(x)y, y)`. Errors are relative to
/// `1 + |analytic|`.
pub fn fd_check_functional(phi: &TestFunctional, x: &[f64], delta: f64) -> Result<FdCheck> {
    if !(delta > 0.0) {
        return Err(Error::domain(format!("finite-difference step must be positive, got {delta}")));
    }
    if let Some(v) = phi.direction() {
        if v.len() != x.len() {
            return Err(Error::DimensionMismatch { context: "fd_check_functional point", expected: v.len(), found: x.len() });
        }
    }
    let rng = KeyedNormal::new(0x5eed, x.len() as u64);
    let n = x.len();
    let mut out = FdCheck { grad_err: 0.0, hess_err: 0.0 };
    for d in 0..FD_DIRECTIONS {
        let mut y: Vec<f64> = (0..n).map(|i| rng.normal((d * n + i) as u64)).collect();
        let ny = norm(&y);
        y.iter_mut().for_each(|c| *c /= ny);
        let plus: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + delta * b).collect();
        let minus: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - delta * b).collect();

        let fd_grad = (phi.value(&plus) - phi.value(&minus)) / (2.0 * delta);
        let grad = dot(&phi.gradient(x), &y);
        out.grad_err = out.grad_err.max((fd_grad - grad).abs() / (1.0 + grad.abs()));

        let fd_hess = (dot(&phi.gradient(&plus), &y) - dot(&phi.gradient(&minus), &y)) / (2.0 * delta);
        let hess = dot(&phi.hessian_apply(x, &y), &y);
        out.hess_err = out.hess_err.max((fd_hess - hess).abs() / (1.0 + hess.abs()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn point(n: usize, stream: u64, scale: f64) -> Vec<f64> {
        let g = KeyedNormal::new(11, stream);
        (0..n).map(|i| scale * g.normal(i as u64)).collect()
    }

    #[test]
    fn linear_pairing_derivatives_are_exact() {
        let phi = TestFunctional::linear_pairing(point(16, 1, 1.0)).unwrap();
        let fd = fd_check_functional(&phi, &point(16, 2, 1.0), 1e-5).unwrap();
        assert!(fd.grad_err <= 1e-9 && fd.hess_err <= 1e-9, "{fd:?}");
        assert_eq!(phi.hessian_bound(), 0.0);
    }

    #[test]
    fn cos_pairing_gradient_vanishes_at_origin() {
        let phi = TestFunctional::cos_pairing(low_pass_direction(10, 8)).unwrap();
        let zero = vec![0.0; 20];
        assert!(phi.gradient(&zero).iter().all(|g| *g == 0.0));
        let fd = fd_check_functional(&phi, &zero, 1e-5).unwrap();
        assert!(fd.grad_err < 1e-9 && fd.hess_err < 1e-9, "{fd:?}");
    }

    #[test]
    fn cos_pairing_fd_at_random_point() {
        let phi = TestFunctional::cos_pairing(point(12, 3, 0.5)).unwrap();
        let fd = fd_check_functional(&phi, &point(12, 4, 1.0), 1e-5).unwrap();
        assert!(fd.grad_err < 1e-8 && fd.hess_err < 1e-8, "{fd:?}");
    }

    #[test]
    fn gauss_bump_fd_at_delta_1e4() {
        let phi = TestFunctional::gauss_bump(0.7).unwrap();
        for stream in 0..4 {
            let fd = fd_check_functional(&phi, &point(10, 10 + stream, 0.3), 1e-4).unwrap();
            assert!(fd.grad_err <= 1e-5 && fd.hess_err <= 1e-5, "{fd:?}");
        }
    }

    #[test]
    fn bump_gradient_bound_is_attained_at_radius_sigma() {
        let sigma = 0.4;
        let phi = TestFunctional::gauss_bump(sigma).unwrap();
        let mut x = vec![0.0; 6];
        x[3] = sigma;
        assert!((norm(&phi.gradient(&x)) - phi.gradient_bound()).abs() < 1e-15);
        // Hessian at the origin is −I/σ².
        let mut e = vec![0.0; 6];
        e[0] = 1.0;
        assert!((norm(&phi.hessian_apply(&[0.0; 6], &e)) - phi.hessian_bound()).abs() < 1e-12);
    }

    #[test]
    fn constructors_validate() {
        assert!(TestFunctional::gauss_bump(0.0).is_err());
        assert!(TestFunctional::cos_pairing(vec![]).is_err());
        assert!(TestFunctional::linear_pairing(vec![f64::NAN]).is_err());
        assert!(TestFunctional::gauss_bump(1.0).unwrap().exact_kind().is_err());
        let phi = TestFunctional::cos_pairing(vec![1.0]).unwrap();
        assert!(fd_check_functional(&phi, &[0.0], 0.0).is_err());
        assert!(fd_check_functional(&phi, &[0.0, 1.0], 1e-5).is_err());
    }

    #[test]
    fn low_pass_direction_is_unit_real_and_supported_on_first_modes() {
        let v = low_pass_direction(512, 8);
        assert!((norm(&v) - 1.0).abs() < 1e-15);
        assert!(v.iter().enumerate().all(|(i, &c)| (c != 0.0) == (i % 2 == 0 && i < 16)));
    }

    fn vec_strategy(n: usize, scale: f64) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-scale..scale, n)
    }

    proptest! {
        #[test]
        fn gradient_and_hessian_respect_sup_bounds(
            v in vec_strategy(6, 2.0),
            x in vec_strategy(6, 3.0),
            y in vec_strategy(6, 1.0),
            sigma in 0.1f64..3.0,
        ) {
            let ny = norm(&y).max(1e-12);
            for phi in [
                TestFunctional::cos_pairing(v.clone()).unwrap(),
                TestFunctional::linear_pairing(v.clone()).unwrap(),
                TestFunctional::gauss_bump(sigma).unwrap(),
            ] {
                let slack = 1.0 + 1e-12;
                prop_assert!(norm(&phi.gradient(&x)) <= phi.gradient_bound() * slack + 1e-300);
                prop_assert!(norm(&phi.hessian_apply(&x, &y)) <= phi.hessian_bound() * ny * slack + 1e-300);
            }
        }
    }
}
