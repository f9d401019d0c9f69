//! Covariance operators of the two Wiener processes and keyed sampling of
//! their increments.
//!
//! `Q_m` is diagonal in the sine basis with eigenvalues
//! `q_{m,j} = scale_m · λ_j^{−ρ}`. Increments follow the Karhunen–Loève form
//! `ΔW_m(t_k) = Σ_j √(q_{m,j} Δt) ξ_{k,m,j} φ_j`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spectral::dirichlet_eigenvalue;

/// Smallest admissible `ρ − θ` when constructing a [`CovarianceSpec`].
pub const REGULARITY_MARGIN: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSpec {
    theta: f64,
    rho: f64,
    scales: [f64; 2],
    q: [Vec<f64>; 2],
}

impl CovarianceSpec {
    pub fn new(modes: usize, theta: f64, rho: f64, scale1: f64, scale2: f64) -> Result<Self> {
        if modes == 0 {
            return Err(Error::domain("truncation level J must be at least 1"));
        }
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::domain(format!("theta = {theta} must lie in [0, 1]")));
        }
        if !(rho - theta >= REGULARITY_MARGIN - 1e-12) {
            return Err(Error::domain(format!(
                "rho = {rho} must satisfy rho >= theta + {REGULARITY_MARGIN} (theta = {theta})"
            )));
        }
        for (m, s) in [scale1, scale2].iter().enumerate() {
            if !(*s > 0.0 && s.is_finite()) {
                return Err(Error::domain(format!("scale{} = {s} must be positive", m + 1)));
            }
        }
        let q = [scale1, scale2].map(|s| (1..=modes).map(|j| s * dirichlet_eigenvalue(j).powf(-rho)).collect());
        Ok(Self { theta, rho, scales: [scale1, scale2], q })
    }

    /// `Q₁ = Q₂ = 0`.
    pub fn noiseless(modes: usize, theta: f64) -> Result<Self> {
        if modes == 0 {
            return Err(Error::domain("truncation level J must be at least 1"));
        }
        Ok(Self { theta, rho: f64::INFINITY, scales: [0.0, 0.0], q: [vec![0.0; modes], vec![0.0; modes]] })
    }

    pub fn modes(&self) -> usize {
        self.q[0].len()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn scales(&self) -> [f64; 2] {
        self.scales
    }

    pub fn is_noiseless(&self) -> bool {
        self.scales == [0.0, 0.0]
    }

    pub fn q1(&self) -> &[f64] {
        &self.q[0]
    }

    pub fn q2(&self) -> &[f64] {
        &self.q[1]
    }

    /// Eigenvalues of `Q_m`, `m ∈ {0, 1}`.
    pub fn q(&self, m: usize) -> &[f64] {
        &self.q[m]
    }

    /// `Tr Q₁ + Tr Q₂` over the retained modes.
    pub fn trace_q(&self) -> f64 {
        self.q[0].iter().chain(&self.q[1]).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsCheck {
    /// `Σ_{j≤J} λ_j^θ (q_{1,j} + q_{2,j})`.
    pub retained: f64,
    /// Integral-comparison bound on `Σ_{j>J} λ_j^θ (q_{1,j} + q_{2,j})`.
    pub tail_bound: f64,
}

/// `‖Λ^{θ/2} Q₁^{1/2}‖²_HS + ‖Λ^{θ/2} Q₂^{1/2}‖²_HS`, split into the retained
/// part and a bound on the omitted tail. The series converges iff
/// `ρ > θ + 1/2`.
pub fn hs_check(spec: &CovarianceSpec, theta: f64) -> Result<HsCheck> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::domain(format!("theta = {theta} must lie in [0, 1]")));
    }
    if spec.is_noiseless() {
        return Ok(HsCheck { retained: 0.0, tail_bound: 0.0 });
    }
    let excess = 2.0 * (spec.rho - theta) - 1.0;
    if excess <= 0.0 {
        return Err(Error::Divergent(format!(
            "Σ λ_j^θ q_j diverges: requires rho > theta + 1/2, got rho = {} and theta = {theta}",
            spec.rho
        )));
    }
    let j_max = spec.modes();
    let retained = (0..j_max)
        .map(|j| dirichlet_eigenvalue(j + 1).powf(theta) * (spec.q[0][j] + spec.q[1][j]))
        .sum();
    let constant = (spec.scales[0] + spec.scales[1]) * PI.powf(2.0 * (theta - spec.rho));
    let tail_bound = constant * (j_max as f64).powf(-excess) / excess;
    Ok(HsCheck { retained, tail_bound })
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based standard normal generator: a SplitMix64 stream keyed by
/// `(seed, stream)`, where counter `n` yields one Box–Muller pair. Draws are
/// addressable in any order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyedNormal {
    base: u64,
}

impl KeyedNormal {
    pub fn new(seed: u64, stream: u64) -> Self {
        let base = mix64(mix64(seed.wrapping_add(GOLDEN)) ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
        Self { base }
    }

    #[inline]
    fn bits(&self, n: u64) -> u64 {
        mix64(self.base.wrapping_add(n.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    /// Two independent standard normals for counter `n`.
    #[inline]
    pub fn pair(&self, n: u64) -> (f64, f64) {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        let u1 = ((self.bits(2 * n) >> 11) + 1) as f64 * SCALE;
        let u2 = (self.bits(2 * n + 1) >> 11) as f64 * SCALE;
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        (r * c, r * s)
    }

    /// The `i`-th normal of the stream (half of pair `i / 2`).
    pub fn normal(&self, i: u64) -> f64 {
        let (x, y) = self.pair(i / 2);
        if i % 2 == 0 {
            x
        } else {
            y
        }
    }
}

/// Addresses `ξ_{k,m,j}` of one Wiener path without materialising it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathKey {
    pub seed: u64,
    pub path: u64,
    pub modes: usize,
    generator: KeyedNormal,
}

impl PathKey {
    pub fn new(seed: u64, path: u64, modes: usize) -> Self {
        Self { seed, path, modes, generator: KeyedNormal::new(seed, path) }
    }

    /// `(ξ_{k,1,j}, ξ_{k,2,j})` with zero-based step `k` and mode index `j`.
    #[inline]
    pub fn xi_pair(&self, k: usize, j: usize) -> (f64, f64) {
        self.generator.pair((k * self.modes + j) as u64)
    }

    pub fn xi(&self, k: usize, m: usize, j: usize) -> f64 {
        let (x, y) = self.xi_pair(k, j);
        if m == 0 {
            x
        } else {
            y
        }
    }
}

/// Standard normal draws `ξ_{k,m,j}` of one path, stored `[k][m][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerSample {
    key: PathKey,
    steps: usize,
    dt: f64,
    draws: Vec<f64>,
}

impl WienerSample {
    pub fn seed(&self) -> u64 {
        self.key.seed
    }

    pub fn path(&self) -> u64 {
        self.key.path
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn modes(&self) -> usize {
        self.key.modes
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn draws(&self) -> &[f64] {
        &self.draws
    }

    #[inline]
    pub fn xi(&self, k: usize, m: usize, j: usize) -> f64 {
        self.draws[(2 * k + m) * self.key.modes + j]
    }

    /// Coefficient of `φ_j` in `ΔW_m(t_k)`.
    pub fn increment(&self, spec: &CovarianceSpec, k: usize, m: usize, j: usize) -> f64 {
        (spec.q(m)[j] * self.dt).sqrt() * self.xi(k, m, j)
    }

    /// Regenerates the draws for another path of the same seed, reusing the buffer.
    pub fn refill(&mut self, path: u64) {
        self.key = PathKey::new(self.key.seed, path, self.key.modes);
        let j_max = self.key.modes;
        for k in 0..self.steps {
            let (first, second) = self.draws[2 * k * j_max..(2 * k + 2) * j_max].split_at_mut(j_max);
            for j in 0..j_max {
                let (x, y) = self.key.xi_pair(k, j);
                first[j] = x;
                second[j] = y;
            }
        }
    }
}

/// Draws path `path` of the seeded family with `steps` uniform steps on `[0, T]`.
pub fn sample_increments(seed: u64, path: u64, steps: usize, final_time: f64, spec: &CovarianceSpec) -> Result<WienerSample> {
    if steps == 0 {
        return Err(Error::domain("number of time steps K must be at least 1"));
    }
    if !(final_time >= 0.0) {
        return Err(Error::domain(format!("final time must be nonnegative, got {final_time}")));
    }
    let modes = spec.modes();
    let mut sample = WienerSample {
        key: PathKey::new(seed, path, modes),
        steps,
        dt: final_time / steps as f64,
        draws: vec![0.0; steps * 2 * modes],
    };
    sample.refill(path);
    Ok(sample)
}
