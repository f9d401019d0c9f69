//! Exact strong, weak and deterministic errors between the finite element
//! solution `X_h(T)` and the truncated spectral reference `X(T)`.
//!
//! All norms are evaluated through the cross-Gram `g_ij = ⟨φ_{h,i}, φ_j⟩`:
//! for `f = Σ c_j φ_j` and `f_h = Σ d_i φ_{h,i}`,
//! `‖f_h − f‖² = ‖c‖² + ‖d‖² − 2 dᵀ g c`.

use crate::error::{Error, Result};
use crate::fem::{discrete_convolution_law, rotate_modal, Discretization};
use crate::functional::TestFunctional;
use crate::law::gaussian_functional;
use crate::noise::{hs_check, CovarianceSpec};
use crate::spectral::{apply_group, dirichlet_eigenvalue, stochastic_convolution_law, SpectralCoeffs};
use crate::timeint::sigma;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_truncation(context: &'static str, d: &Discretization, modes: usize) -> Result<()> {
    if modes != d.cross.continuous_modes() {
        return Err(Error::DimensionMismatch { context, expected: d.cross.continuous_modes(), found: modes });
    }
    Ok(())
}

fn deterministic_error_sq(t: f64, x0: &SpectralCoeffs, d: &Discretization) -> f64 {
    let exact = apply_group(t, x0);
    let (pa, pb) = rotate_modal(t, &d.cross.project(&x0.a), &d.cross.project(&x0.b), &d.eig.lambdas);
    let cross = dot(&pa, &d.cross.project(&exact.a)) + dot(&pb, &d.cross.project(&exact.b));
    let e2 = dot(&exact.a, &exact.a) + dot(&exact.b, &exact.b) + dot(&pa, &pa) + dot(&pb, &pb) - 2.0 * cross;
    e2.max(0.0)
}

/// `|||(E_h(t)B_h − E(t))X₀|||`.
pub fn deterministic_error(t: f64, x0: &SpectralCoeffs, d: &Discretization) -> Result<f64> {
    check_truncation("deterministic_error initial data", d, x0.modes())?;
    Ok(deterministic_error_sq(t, x0, d).sqrt())
}

/// `∫₀ᵀ |||(E_h(s)B_h − E(s)) e_{m,j}|||² ds` for each retained `j`; the same
/// for both components.
fn noise_mode_errors(t: f64, d: &Discretization) -> Vec<f64> {
    d.cross
        .sparse_columns(1e-14)
        .iter()
        .enumerate()
        .map(|(j, col)| {
            let lambda = dirichlet_eigenvalue(j + 1);
            let (mut norm, mut overlap) = (0.0, 0.0);
            for &(i, g) in col {
                norm += g * g;
                overlap += g * g * sigma(d.eig.lambdas[i] - lambda, t);
            }
            (t * (1.0 + norm) - 2.0 * overlap).max(0.0)
        })
        .collect()
}

/// `sqrt(E|||X_h(T) − X(T)|||²)` for the solutions driven by the same `W`.
pub fn exact_strong_error(t: f64, spec: &CovarianceSpec, x0: &SpectralCoeffs, d: &Discretization) -> Result<f64> {
    check_truncation("exact_strong_error initial data", d, x0.modes())?;
    check_truncation("exact_strong_error noise", d, spec.modes())?;
    if !(t >= 0.0) {
        return Err(Error::domain(format!("final time must be nonnegative, got {t}")));
    }
    let mut e2 = deterministic_error_sq(t, x0, d);
    if !spec.is_noiseless() {
        let per_mode = noise_mode_errors(t, d);
        e2 += (0..spec.modes()).map(|j| (spec.q1()[j] + spec.q2()[j]) * per_mode[j]).sum::<f64>();
    }
    Ok(e2.sqrt())
}

/// Strong error of the left-point Monte Carlo estimator in expectation:
/// the time integral of [`exact_strong_error`] replaced by the rule with
/// `steps` nodes `τ_k = T − kΔt`.
pub fn time_rule_strong_error(
    t: f64,
    spec: &CovarianceSpec,
    x0: &SpectralCoeffs,
    d: &Discretization,
    steps: usize,
) -> Result<f64> {
    check_truncation("time_rule_strong_error initial data", d, x0.modes())?;
    if steps == 0 {
        return Err(Error::domain("steps K must be at least 1"));
    }
    let mut e2 = deterministic_error_sq(t, x0, d);
    if spec.is_noiseless() {
        return Ok(e2.sqrt());
    }
    let dt = t / steps as f64;
    for (j, col) in d.cross.sparse_columns(1e-14).iter().enumerate() {
        let q = spec.q1()[j] + spec.q2()[j];
        if q == 0.0 {
            continue;
        }
        let lambda = dirichlet_eigenvalue(j + 1);
        let norm: f64 = col.iter().map(|(_, g)| g * g).sum();
        let mut acc = 0.0;
        for k in 0..steps {
            let tau = t - k as f64 * dt;
            let overlap: f64 = col.iter().map(|&(i, g)| g * g * (tau * (d.eig.lambdas[i] - lambda)).cos()).sum();
            acc += 1.0 + norm - 2.0 * overlap;
        }
        e2 += q * dt * acc.max(0.0);
    }
    Ok(e2.sqrt())
}

/// `E Φ(X_h(T)) − E Φ(X(T))` with `X_{h,0} = P_h X₀` and the direction of
/// `Φ` mapped to the discrete eigenbasis through the cross-Gram.
pub fn exact_weak_error(
    t: f64,
    spec: &CovarianceSpec,
    x0: &SpectralCoeffs,
    d: &Discretization,
    phi: &TestFunctional,
) -> Result<f64> {
    let kind = phi.exact_kind()?;
    let v = phi.direction().expect("pairing functionals carry a direction");
    check_truncation("exact_weak_error initial data", d, x0.modes())?;
    let continuous = stochastic_convolution_law(t, spec, x0)?;
    let discrete = discrete_convolution_law(t, spec, &d.project_spectral(x0)?, &d.eig, &d.cross)?;
    let v_h = d.cross.map_direction(v)?;
    Ok(gaussian_functional(&discrete, &v_h, kind)? - gaussian_functional(&continuous, v, kind)?)
}

/// Bound on the change of a measured quantity caused by the omitted modes
/// `j > J`, from the tail of `Σ (q_{1,j} + q_{2,j})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationFloor {
    pub tail: f64,
    pub final_time: f64,
}

impl TruncationFloor {
    pub fn new(spec: &CovarianceSpec, final_time: f64) -> Result<Self> {
        Ok(Self { tail: hs_check(spec, 0.0)?.tail_bound, final_time })
    }

    /// The omitted modes add at most `4T·tail` to the squared strong error.
    pub fn strong(&self, strong: f64) -> f64 {
        if strong > 0.0 {
            2.0 * self.final_time * self.tail / strong
        } else {
            (4.0 * self.final_time * self.tail).sqrt()
        }
    }

    /// `½ sup‖Φ''‖ · T · tail`.
    pub fn weak(&self, phi: &TestFunctional) -> f64 {
        0.5 * phi.hessian_bound() * self.final_time * self.tail
    }
}

/// One row of a mesh sweep. Columns not computed are `None`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorRecord {
    pub h: f64,
    pub nodes: usize,
    pub modes: usize,
    pub theta: f64,
    pub final_time: f64,
    pub strong_exact: Option<f64>,
    pub strong_mc: Option<f64>,
    pub strong_stderr: Option<f64>,
    pub weak_exact: Option<f64>,
    pub weak_mc: Option<f64>,
    pub weak_stderr: Option<f64>,
    pub det_error: Option<f64>,
    pub seconds: Option<f64>,
}

impl ErrorRecord {
    pub fn new(d: &Discretization, theta: f64, final_time: f64) -> Self {
        Self {
            h: d.mesh.h(),
            nodes: d.mesh.nodes(),
            modes: d.cross.continuous_modes(),
            theta,
            final_time,
            ..Self::default()
        }
    }

    /// Nonnegative strong and deterministic errors, every value finite.
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.strong_exact,
            self.strong_mc,
            self.strong_stderr,
            self.weak_exact,
            self.weak_mc,
            self.weak_stderr,
            self.det_error,
            self.seconds,
        ];
        if all.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Divergent(format!("non-finite error value in row N = {}", self.nodes)));
        }
        let nonneg = [self.strong_exact, self.strong_mc, self.strong_stderr, self.weak_stderr, self.det_error];
        if nonneg.iter().flatten().any(|v| *v < 0.0) {
            return Err(Error::domain(format!("negative strong/deterministic error in row N = {}", self.nodes)));
        }
        Ok(())
    }
}
