//! Coupled Monte Carlo for the strong and weak errors.
//!
//! Both solutions are driven by the same increments through the left-point
//! convolution rule
//! `X(T) ≈ E(T)X₀ + Σ_{k<K} E(T − t_k) ΔW_k`, `t_k = kΔt`,
//! the continuous path accumulated in the sine basis and the discrete one in
//! the discrete eigenbasis after projecting each increment with `B_h`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{rotate_modal, Discretization};
use crate::functional::TestFunctional;
use crate::noise::{sample_increments, CovarianceSpec, PathKey, WienerSample};
use crate::spectral::{apply_group, dirichlet_eigenvalue, SpectralCoeffs};

/// Environment variable capping the worker threads used for sampling.
pub const THREADS_ENV: &str = "SCHROD_SPDE_THREADS";

/// Runs `f` on a pool sized by [`THREADS_ENV`] when it is set to a positive
/// integer, otherwise on the global pool.
pub fn with_thread_cap<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    let cap = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0);
    match cap.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

/// Pairwise summation; error grows like `O(ε log n)`.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if x.len() <= BLOCK {
        x.iter().sum()
    } else {
        let (l, r) = x.split_at(x.len() / 2);
        pairwise_sum(l) + pairwise_sum(r)
    }
}

/// Mean and standard error of the mean, two-pass.
fn mean_stderr(x: &[f64]) -> (f64, f64) {
    if x.iter().all(|v| *v == x[0]) {
        return (x[0], 0.0);
    }
    let n = x.len() as f64;
    let mean = pairwise_sum(x) / n;
    let dev: Vec<f64> = x.iter().map(|v| (v - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakEstimate {
    /// Mean of the paired difference `Φ(X_h) − Φ(X)`.
    pub value: f64,
    pub stderr: f64,
    /// Standard error if the two means were estimated independently.
    pub unpaired_stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub samples: usize,
    pub steps: usize,
    /// `sqrt(mean |||X_h − X|||²)`.
    pub strong: f64,
    /// Delta-method standard error of `strong`.
    pub strong_stderr: f64,
    pub weak: WeakEstimate,
}

fn validate(t: f64, spec: &CovarianceSpec, x0: &SpectralCoeffs, d: &Discretization, samples: usize, steps: usize) -> Result<()> {
    if samples < 2 {
        return Err(Error::domain(format!("samples must be at least 2, got {samples}")));
    }
    if steps < 1 {
        return Err(Error::domain("steps K must be at least 1"));
    }
    if !(t >= 0.0) {
        return Err(Error::domain(format!("final time must be nonnegative, got {t}")));
    }
    let j = d.cross.continuous_modes();
    for (context, found) in [("mc initial data", x0.modes()), ("mc noise", spec.modes())] {
        if found != j {
            return Err(Error::DimensionMismatch { context, expected: j, found });
        }
    }
    Ok(())
}

fn weak_from(pairs: &[(f64, f64)]) -> WeakEstimate {
    let diff: Vec<f64> = pairs.iter().map(|(h, c)| h - c).collect();
    let fh: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let fc: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (value, stderr) = mean_stderr(&diff);
    let (_, se_h) = mean_stderr(&fh);
    let (_, se_c) = mean_stderr(&fc);
    WeakEstimate { value, stderr, unpaired_stderr: (se_h * se_h + se_c * se_c).sqrt() }
}

/// Rotation tables `cos/sin(τ_k λ)` for `τ_k = T − kΔt`, stored `[k][mode]`.
fn rotation_table(t: f64, steps: usize, lambdas: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let dt = t / steps as f64;
    let mut c = Vec::with_capacity(steps * lambdas.len());
    let mut s = Vec::with_capacity(steps * lambdas.len());
    for k in 0..steps {
        let tau = t - k as f64 * dt;
        for &l in lambdas {
            let (sn, cs) = (tau * l).sin_cos();
            c.push(cs);
            s.push(sn);
        }
    }
    (c, s)
}

struct Engine<'a> {
    d: &'a Discretization,
    phi: &'a TestFunctional,
    phi_h: TestFunctional,
    steps: usize,
    modes: usize,
    sq: [Vec<f64>; 2],
    exact_mean: SpectralCoeffs,
    discrete_mean: (Vec<f64>, Vec<f64>),
    cont_rot: (Vec<f64>, Vec<f64>),
    disc_rot: (Vec<f64>, Vec<f64>),
    columns: Vec<Vec<(usize, f64)>>,
}

struct Scratch {
    sample: WienerSample,
    x: Vec<f64>,
    xh: Vec<f64>,
    proj: [Vec<f64>; 2],
}

impl<'a> Engine<'a> {
    fn new(t: f64, spec: &CovarianceSpec, x0: &SpectralCoeffs, d: &'a Discretization, phi: &'a TestFunctional, steps: usize) -> Result<Self> {
        let modes = d.cross.continuous_modes();
        let dt = t / steps as f64;
        let sq = [0, 1].map(|m| spec.q(m).iter().map(|q| (q * dt).sqrt()).collect::<Vec<_>>());
        let lambdas: Vec<f64> = (1..=modes).map(dirichlet_eigenvalue).collect();
        let phi_h = match phi.direction() {
            Some(v) => phi.with_direction(d.cross.map_direction(v)?),
            None => phi.clone(),
        };
        Ok(Self {
            d,
            phi,
            phi_h,
            steps,
            modes,
            sq,
            exact_mean: apply_group(t, x0),
            discrete_mean: rotate_modal(t, &d.cross.project(&x0.a), &d.cross.project(&x0.b), &d.eig.lambdas),
            cont_rot: rotation_table(t, steps, &lambdas),
            disc_rot: rotation_table(t, steps, &d.eig.lambdas),
            columns: d.cross.sparse_columns(1e-14),
        })
    }

    fn scratch(&self, seed: u64, t: f64, spec: &CovarianceSpec) -> Scratch {
        let n = self.d.mesh.nodes();
        Scratch {
            sample: sample_increments(seed, 0, self.steps, t, spec).expect("validated"),
            x: vec![0.0; 2 * self.modes],
            xh: vec![0.0; 2 * n],
            proj: [vec![0.0; n], vec![0.0; n]],
        }
    }

    /// `(|||X_h − X|||², Φ(X_h), Φ(X))` for one path.
    fn path(&self, s: &mut Scratch, path: u64) -> (f64, f64, f64) {
        s.sample.refill(path);
        let (j_max, n) = (self.modes, self.d.mesh.nodes());
        for j in 0..j_max {
            s.x[2 * j] = self.exact_mean.a[j];
            s.x[2 * j + 1] = self.exact_mean.b[j];
        }
        for i in 0..n {
            s.xh[2 * i] = self.discrete_mean.0[i];
            s.xh[2 * i + 1] = self.discrete_mean.1[i];
        }
        for k in 0..self.steps {
            let (cr, sr) = (&self.cont_rot.0[k * j_max..], &self.cont_rot.1[k * j_max..]);
            s.proj[0].iter_mut().for_each(|p| *p = 0.0);
            s.proj[1].iter_mut().for_each(|p| *p = 0.0);
            for j in 0..j_max {
                let dw1 = self.sq[0][j] * s.sample.xi(k, 0, j);
                let dw2 = self.sq[1][j] * s.sample.xi(k, 1, j);
                let (c, sn) = (cr[j], sr[j]);
                s.x[2 * j] += c * dw1 - sn * dw2;
                s.x[2 * j + 1] += sn * dw1 + c * dw2;
                for &(i, g) in &self.columns[j] {
                    s.proj[0][i] += g * dw1;
                    s.proj[1][i] += g * dw2;
                }
            }
            let (cd, sd) = (&self.disc_rot.0[k * n..], &self.disc_rot.1[k * n..]);
            for i in 0..n {
                let (p1, p2) = (s.proj[0][i], s.proj[1][i]);
                s.xh[2 * i] += cd[i] * p1 - sd[i] * p2;
                s.xh[2 * i + 1] += sd[i] * p1 + cd[i] * p2;
            }
        }
        // Mixed Gram identity: |||X_h − X|||² = |||X|||² + |||X_h|||² − 2 Σ (X_h)_i g_ij X_j.
        let mut cross = 0.0;
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, g) in col {
                cross += g * (s.xh[2 * i] * s.x[2 * j] + s.xh[2 * i + 1] * s.x[2 * j + 1]);
            }
        }
        let norm = |v: &[f64]| v.iter().map(|c| c * c).sum::<f64>();
        let d2 = (norm(&s.x) + norm(&s.xh) - 2.0 * cross).max(0.0);
        (d2, self.phi_h.value(&s.xh), self.phi.value(&s.x))
    }
}

/// Coupled Monte Carlo estimate of the strong and weak errors over paths
/// `0..samples` of `seed`.
#[allow(clippy::too_many_arguments)]
pub fn mc_estimate(
    t: f64,
    spec: &CovarianceSpec,
    x0: &SpectralCoeffs,
    d: &Discretization,
    phi: &TestFunctional,
    samples: usize,
    steps: usize,
    seed: u64,
) -> Result<McEstimate> {
    validate(t, spec, x0, d, samples, steps)?;
    let engine = Engine::new(t, spec, x0, d, phi, steps)?;
    let results: Vec<(f64, f64, f64)> = if spec.is_noiseless() {
        // Every path is the deterministic one.
        let mut s = engine.scratch(seed, t, spec);
        vec![engine.path(&mut s, 0); samples]
    } else {
        with_thread_cap(|| {
            (0..samples as u64)
                .into_par_iter()
                .map_init(|| engine.scratch(seed, t, spec), |s, p| engine.path(s, p))
                .collect()
        })
    };
    let d2: Vec<f64> = results.iter().map(|r| r.0).collect();
    let (mean_d2, se_d2) = mean_stderr(&d2);
    let strong = mean_d2.sqrt();
    let strong_stderr = if strong > 0.0 { se_d2 / (2.0 * strong) } else { 0.0 };
    let pairs: Vec<(f64, f64)> = results.iter().map(|r| (r.1, r.2)).collect();
    Ok(McEstimate { samples, steps, strong, strong_stderr, weak: weak_from(&pairs) })
}

/// Modes whose weight bound is below this fraction of the largest are skipped.
const ACTIVE_TOL: f64 = 1e-13;

/// Linear weights of `(X(T), v)` and `(X_h(T), v_h)` on the draws
/// `ξ_{k,m,j}`, restricted to the modes `j` that carry any weight.
struct PairingWeights {
    active: Vec<usize>,
    /// `[k][slot][4]`: continuous m=1, m=2, discrete m=1, m=2.
    w: Vec<[f64; 4]>,
    mean: f64,
    mean_h: f64,
}

impl PairingWeights {
    fn new(t: f64, spec: &CovarianceSpec, x0: &SpectralCoeffs, d: &Discretization, v: &[f64], steps: usize) -> Result<Self> {
        let modes = d.cross.continuous_modes();
        let n = d.mesh.nodes();
        let dt = t / steps as f64;
        let v_h = d.cross.map_direction(v)?;
        let columns = d.cross.sparse_columns(1e-14);
        let lambdas: Vec<f64> = (1..=modes).map(dirichlet_eigenvalue).collect();
        let (cc, sc) = rotation_table(t, steps, &lambdas);
        let (cd, sd) = rotation_table(t, steps, &d.eig.lambdas);
        let weight = |k: usize, j: usize| -> [f64; 4] {
            let (s1, s2) = ((spec.q1()[j] * dt).sqrt(), (spec.q2()[j] * dt).sqrt());
            let (c, s) = (cc[k * modes + j], sc[k * modes + j]);
            let (va, vb) = (v[2 * j], v[2 * j + 1]);
            let (mut h1, mut h2) = (0.0, 0.0);
            for &(i, g) in &columns[j] {
                let (c, s) = (cd[k * n + i], sd[k * n + i]);
                let (va, vb) = (v_h[2 * i], v_h[2 * i + 1]);
                h1 += g * (va * c + vb * s);
                h2 += g * (vb * c - va * s);
            }
            [s1 * (va * c + vb * s), s2 * (vb * c - va * s), s1 * h1, s2 * h2]
        };
        // Weight bound per mode: |v_j| + sum_i |g_ij| |v_h,i|, times the noise scale.
        let bound: Vec<f64> = (0..modes)
            .map(|j| {
                let s = (spec.q1()[j].max(spec.q2()[j]) * dt).sqrt();
                let vh: f64 = columns[j].iter().map(|&(i, g)| g.abs() * (v_h[2 * i].abs() + v_h[2 * i + 1].abs())).sum();
                s * (v[2 * j].abs() + v[2 * j + 1].abs() + vh)
            })
            .collect();
        let cutoff = ACTIVE_TOL * bound.iter().cloned().fold(0.0, f64::max);
        let active: Vec<usize> = (0..modes).filter(|&j| bound[j] > cutoff).collect();
        let mut w = Vec::with_capacity(steps * active.len());
        for k in 0..steps {
            for &j in &active {
                w.push(weight(k, j));
            }
        }
        let exact = apply_group(t, x0).interleaved();
        let (pa, pb) = rotate_modal(t, &d.cross.project(&x0.a), &d.cross.project(&x0.b), &d.eig.lambdas);
        let mean = exact.iter().zip(v).map(|(a, b)| a * b).sum();
        let mean_h = (0..n).map(|i| pa[i] * v_h[2 * i] + pb[i] * v_h[2 * i + 1]).sum();
        Ok(Self { active, w, mean, mean_h })
    }

    /// `((X_h, v_h), (X, v))` for one path, drawing only the active keys.
    fn pairings(&self, key: &PathKey) -> (f64, f64) {
        let (mut p, mut ph) = (self.mean, self.mean_h);
        let width = self.active.len();
        for (k, row) in self.w.chunks_exact(width.max(1)).enumerate() {
            for (slot, &j) in self.active.iter().enumerate() {
                let (x1, x2) = key.xi_pair(k, j);
                let w = &row[slot];
                p += w[0] * x1 + w[1] * x2;
                ph += w[2] * x1 + w[3] * x2;
            }
        }
        (ph, p)
    }
}

/// Weak-error Monte Carlo for pairing functionals. Uses the same draws as
/// [`mc_estimate`] but only those with nonzero weight in either pairing.
#[allow(clippy::too_many_arguments)]
pub fn mc_weak_estimate(
    t: f64,
    spec: &CovarianceSpec,
    x0: &SpectralCoeffs,
    d: &Discretization,
    phi: &TestFunctional,
    samples: usize,
    steps: usize,
    seed: u64,
) -> Result<WeakEstimate> {
    validate(t, spec, x0, d, samples, steps)?;
    let v = phi
        .direction()
        .ok_or_else(|| Error::Unsupported(format!("fast weak path needs a pairing functional, got {}", phi.name())))?;
    let weights = PairingWeights::new(t, spec, x0, d, v, steps)?;
    let modes = d.cross.continuous_modes();
    let scalar = |p: f64| match phi {
        TestFunctional::CosPairing { .. } => p.cos(),
        _ => p,
    };
    let pairs: Vec<(f64, f64)> = with_thread_cap(|| {
        (0..samples as u64)
            .into_par_iter()
            .map(|path| {
                let (ph, p) = weights.pairings(&PathKey::new(seed, path, modes));
                (scalar(ph), scalar(p))
            })
            .collect()
    });
    Ok(weak_from(&pairs))
}
