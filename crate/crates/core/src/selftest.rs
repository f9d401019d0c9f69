//! Self-test suites run by the command line front end and the acceptance
//! target: operator inequalities on seeded random matrices, structural
//! invariants of both groups and the finite element spaces, and closed-form
//! oracles.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::Result;
use crate::fem::{
    apply_discrete_group, discrete_convolution_law, l2_project, sine_hat_overlap, uniform_discrete_eigenvalue, Discretization,
    FemField,
};
use crate::law::{gaussian_functional, FunctionalKind};
use crate::noise::{CovarianceSpec, KeyedNormal};
use crate::operator_algebra::DenseOperator;
use crate::quad::{composite_rule, integrate};
use crate::spectral::{apply_group, dirichlet_eigenvalue, sine_mode, stochastic_convolution_law, InitialProfile, SpectralCoeffs};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst observed value against its tolerance.
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    fn new(suite: &'static str) -> Self {
        Self { suite, checks: Vec::new() }
    }

    /// Records `worst <= tol`.
    fn bound(&mut self, name: &str, worst: f64, tol: f64) {
        self.checks.push(Check { name: name.into(), passed: worst <= tol, detail: format!("worst {worst:.3e} (tol {tol:.0e})") });
    }

    fn flag(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check { name: name.into(), passed, detail });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "[{}] {}/{}: {}", if c.passed { "PASS" } else { "FAIL" }, self.suite, c.name, c.detail)?;
        }
        Ok(())
    }
}

fn random_matrix(rows: usize, cols: usize, rng: &KeyedNormal, offset: u64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |r, c| rng.normal(offset + (r * cols + c) as u64))
}

/// Relative tolerance of the operator suite.
pub const OPERATOR_TOL: f64 = 1e-10;

/// Trace and norm inequalities on `instances` seeded random pairs of sizes
/// 2–12. Inequalities are checked as `lhs − rhs ≤ tol·(1 + rhs)`, identities
/// as `|lhs − rhs| ≤ tol·(1 + |lhs|)`.
pub fn operator_suite(seed: u64, instances: usize) -> Result<SuiteReport> {
    let mut worst = [0.0f64; 8];
    let excess = |lhs: f64, rhs: f64| (lhs - rhs) / (1.0 + rhs.abs());
    let rel = |a: f64, b: f64| (a - b).abs() / (1.0 + a.abs());
    for inst in 0..instances {
        let rng = KeyedNormal::new(seed, inst as u64);
        let n = 2 + (mix(seed, inst) % 11) as usize;
        let a = DenseOperator::new(random_matrix(n, n, &rng, 0))?;
        let b = DenseOperator::new(random_matrix(n, n, &rng, 1 << 20))?;
        let ab = a.compose(&b)?;
        let ba = b.compose(&a)?;
        let (tr_ab, tr_ba) = (ab.trace()?, ba.trace()?);
        let (a1, b_op) = (a.trace_norm(), b.operator_norm());

        worst[0] = worst[0].max(rel(tr_ab, tr_ba));
        worst[1] = worst[1].max(excess(tr_ab.abs(), a1 * b_op));
        worst[2] = worst[2].max(excess(ab.trace_norm(), a1 * b_op)).max(excess(ba.trace_norm(), b_op * a1));
        worst[3] = worst[3].max(rel(a.trace()?, a.transpose().trace()?));
        worst[3] = worst[3].max(rel(a1, a.transpose().trace_norm()));
        worst[4] = worst[4].max(excess(ab.trace_norm(), a.hs_norm() * b.hs_norm()));

        let q = random_matrix(n, n, &rng, 2 << 20).qr().q();
        let rotated = DenseOperator::new(q.transpose() * a.matrix() * &q)?;
        worst[5] = worst[5].max(rel(rotated.hs_norm(), a.hs_norm()));

        // Independent SVD route.
        let sv = a.matrix().clone().svd(false, false).singular_values;
        worst[6] = worst[6].max(rel(sv.sum(), a1));
        worst[7] = worst[7].max(rel(sv.norm(), a.hs_norm()));
    }
    let mut r = SuiteReport::new("operator_algebra");
    let names = [
        "trace(AB) = trace(BA)",
        "|trace(AB)| <= |A|_1 |B|",
        "|AB|_1, |BA|_1 <= |A|_1 |B|",
        "transpose invariance of trace and trace norm",
        "|AB|_1 <= |A|_HS |B|_HS",
        "HS norm orthogonally invariant",
        "trace norm = sum of SVD singular values",
        "HS norm = l2 norm of SVD singular values",
    ];
    for (name, w) in names.iter().zip(worst) {
        r.bound(name, w, OPERATOR_TOL);
    }
    Ok(r)
}

fn mix(seed: u64, i: usize) -> u64 {
    let g = KeyedNormal::new(seed ^ 0xa5a5, i as u64);
    (g.normal(0).to_bits() >> 7) ^ (g.normal(1).to_bits() >> 3)
}

fn random_coeffs(modes: usize, rng: &KeyedNormal) -> SpectralCoeffs {
    let v: Vec<f64> = (0..2 * modes).map(|i| rng.normal(i as u64) / (1.0 + i as f64)).collect();
    SpectralCoeffs::from_interleaved(&v).expect("even length")
}

fn random_field(n: usize, rng: &KeyedNormal) -> FemField {
    FemField::new((0..n).map(|i| rng.normal(i as u64)).collect(), (0..n).map(|i| rng.normal((n + i) as u64)).collect())
        .expect("equal lengths")
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Group laws, isometries, M-orthonormality, projection properties,
/// eigenvalue bounds and covariance PSD floors.
pub fn structural_suite(seed: u64) -> Result<SuiteReport> {
    let mut r = SuiteReport::new("structural");
    let times = [(0.0, 0.37), (0.2, 0.9), (1.0, -0.45), (3.1, 2.7)];

    let mut group = 0.0f64;
    let mut iso = 0.0f64;
    for (idx, &(s, t)) in times.iter().enumerate() {
        let x = random_coeffs(64, &KeyedNormal::new(seed, 100 + idx as u64));
        let lhs = apply_group(t, &apply_group(s, &x));
        let rhs = apply_group(s + t, &x);
        group = group.max(max_diff(&lhs.interleaved(), &rhs.interleaved()));
        iso = iso.max((apply_group(t, &x).norm() - x.norm()).abs() / x.norm());
    }
    r.bound("E(t)E(s) = E(t+s)", group, 1e-10);
    r.bound("E(t) isometry", iso, 1e-12);

    let mut group_h = 0.0f64;
    let mut iso_h = 0.0f64;
    let mut ortho = 0.0f64;
    let mut lower = f64::INFINITY;
    let mut closed = 0.0f64;
    for &n in &[3usize, 15, 31, 63] {
        let d = Discretization::new(n, 2 * (n + 1))?;
        let gram = d.eig.vectors.transpose() * d.matrices.mass() * &d.eig.vectors;
        ortho = ortho.max((gram - DMatrix::<f64>::identity(n, n)).amax());
        for (i, &l) in d.eig.lambdas.iter().enumerate() {
            lower = lower.min(l - dirichlet_eigenvalue(i + 1));
            let c = uniform_discrete_eigenvalue(i + 1, &d.mesh);
            closed = closed.max((l - c).abs() / c);
        }
        let x = random_field(n, &KeyedNormal::new(seed, 200 + n as u64));
        let n0 = x.mass_norm_sq(&d.matrices);
        for &(s, t) in &times {
            let lhs = apply_discrete_group(t, &apply_discrete_group(s, &x, &d.eig), &d.eig);
            let rhs = apply_discrete_group(s + t, &x, &d.eig);
            group_h = group_h.max(max_diff(&lhs.u1, &rhs.u1)).max(max_diff(&lhs.u2, &rhs.u2));
            iso_h = iso_h.max((apply_discrete_group(t, &x, &d.eig).mass_norm_sq(&d.matrices) - n0).abs() / n0);
        }
    }
    r.bound("E_h(t)E_h(s) = E_h(t+s)", group_h, 1e-10);
    r.bound("E_h(t) preserves the M-norm", iso_h, 1e-10);
    r.bound("V^T M V = I", ortho, 1e-10);
    r.flag("lambda_h,j > lambda_j", lower > 0.0, format!("min gap {lower:.3e}"));
    r.bound("lambda_h matches closed form", closed, 1e-10);

    // P_h idempotent and ⟨P_h f, ψ⟩ = ⟨f, ψ⟩ for ψ ∈ V_h.
    let d = Discretization::new(15, 32)?;
    let f = |x: f64| (3.0 * x).sin() * x.exp() + x * x;
    let c = l2_project(f, &d.mesh, &d.matrices)?;
    let interp = |x: f64| (1..=15).map(|k| c[k - 1] * d.mesh.hat(k, x)).sum::<f64>();
    let cc = l2_project(interp, &d.mesh, &d.matrices)?;
    r.bound("P_h idempotent", max_diff(&c, &cc), 1e-12);
    let rule = composite_rule(0.0, 1.0, 64, 12);
    let mc = d.matrices.mass_apply(&c);
    let adjoint = (1..=15).map(|k| (mc[k - 1] - integrate(&rule, |x| f(x) * d.mesh.hat(k, x))).abs()).fold(0.0, f64::max);
    r.bound("<P_h f, psi> = <f, psi>", adjoint, 1e-12);

    // Covariance PSD floors and the squared-norm identity for the default specs.
    let modes = 64;
    let d = Discretization::new(15, modes)?;
    let x0 = SpectralCoeffs::real(InitialProfile::Parabola.sine_coefficients(modes))?;
    let mut psd = true;
    let mut identity = 0.0f64;
    for &(theta, rho) in &[(1.0, 1.3), (0.5, 0.8)] {
        let spec = CovarianceSpec::new(modes, theta, rho, 1.0, 0.6)?;
        let law = stochastic_convolution_law(1.0, &spec, &x0)?;
        psd &= law.cov.is_valid_psd();
        let m2 = gaussian_functional(&law, &[], FunctionalKind::SquaredNorm)?;
        identity = identity.max((m2 - (x0.norm().powi(2) + spec.trace_q())).abs());
        let law_h = discrete_convolution_law(1.0, &spec, &d.project_spectral(&x0)?, &d.eig, &d.cross)?;
        psd &= law_h.cov.is_valid_psd();
    }
    r.flag("continuous and discrete covariances PSD", psd, "eigenvalue floor -1e-12 trace".into());
    r.bound("E|||X(T)|||^2 = |||X0|||^2 + T Tr Q", identity, 1e-10);
    Ok(r)
}

/// Closed forms against quadrature.
pub fn oracle_suite() -> Result<SuiteReport> {
    let mut r = SuiteReport::new("oracle");
    let d = Discretization::new(15, 32)?;
    let mut overlap = 0.0f64;
    for &(j, k) in &[(1usize, 8usize), (2, 3), (9, 15), (31, 1), (45, 7)] {
        let rule = composite_rule(d.mesh.x(k - 1), d.mesh.x(k + 1), 16, 12);
        let q = integrate(&rule, |x| sine_mode(j, x) * d.mesh.hat(k, x));
        overlap = overlap.max((sine_hat_overlap(j, k, &d.mesh)? - q).abs());
    }
    r.bound("sine-hat overlap closed form", overlap, 1e-12);

    let rule = composite_rule(0.0, 1.0, 256, 12);
    let parabola = InitialProfile::Parabola.sine_coefficients(8);
    let coeff = (1..=8)
        .map(|j| (integrate(&rule, |x| x * (1.0 - x) * sine_mode(j, x)) - parabola[j - 1]).abs())
        .fold(0.0, f64::max);
    r.bound("parabola sine coefficients", coeff, 1e-13);

    let one = crate::fem::assemble_n(1)?;
    let d1 = crate::fem::discrete_eigensystem(&one)?;
    r.bound("N = 1 eigenvalue is 12", (d1.lambdas[0] - 12.0).abs(), 1e-12);
    r.flag("12 >= pi^2", d1.lambdas[0] >= PI * PI, format!("{:.6} vs {:.6}", d1.lambdas[0], PI * PI));
    Ok(r)
}

pub fn run_all(seed: u64) -> Result<Vec<SuiteReport>> {
    Ok(vec![operator_suite(seed, 100)?, structural_suite(seed)?, oracle_suite()?])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        for report in run_all(42).unwrap() {
            assert!(report.passed(), "{report}");
        }
    }

    #[test]
    fn operator_suite_is_seed_robust() {
        for seed in [0, 1, 2] {
            let r = operator_suite(seed, 25).unwrap();
            assert!(r.passed(), "{r}");
        }
    }

    #[test]
    fn report_lines_are_prefixed() {
        let r = oracle_suite().unwrap();
        let text = r.to_string();
        assert!(text.lines().all(|l| l.starts_with("[PASS] oracle/")), "{text}");
    }
}
