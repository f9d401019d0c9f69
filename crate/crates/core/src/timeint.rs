//! Closed-form time integrals of products of rotations.
//!
//! With `σ(x) = sin(xT)/x` and `κ(x) = (1 − cos(xT))/x`:
//!
//! ```text
//! ∫₀ᵀ cos(as)cos(bs) ds = ½[σ(a−b) + σ(a+b)]
//! ∫₀ᵀ sin(as)sin(bs) ds = ½[σ(a−b) − σ(a+b)]
//! ∫₀ᵀ sin(as)cos(bs) ds = ½[κ(a+b) + κ(a−b)]
//! ```
//!
//! Both primitives switch to three-term Taylor series once `|x|T` drops below
//! [`RESONANCE_THRESHOLD`], so coinciding frequencies are handled without a
//! special case.

pub const RESONANCE_THRESHOLD: f64 = 1e-4;

/// `sin(xT)/x`, equal to `T` at `x = 0`.
pub fn sigma(x: f64, t: f64) -> f64 {
    let z = x * t;
    if z.abs() < RESONANCE_THRESHOLD {
        let z2 = z * z;
        t * (1.0 - z2 / 6.0 + z2 * z2 / 120.0)
    } else {
        (z).sin() / x
    }
}

/// `(1 − cos(xT))/x`, equal to `0` at `x = 0`.
pub fn kappa(x: f64, t: f64) -> f64 {
    let z = x * t;
    if z.abs() < RESONANCE_THRESHOLD {
        let z2 = z * z;
        t * z * (0.5 - z2 / 24.0 + z2 * z2 / 720.0)
    } else {
        // 1 − cos z = 2 sin²(z/2) avoids cancellation for moderate z.
        let s = (0.5 * z).sin();
        2.0 * s * s / x
    }
}

pub fn cos_cos(a: f64, b: f64, t: f64) -> f64 {
    0.5 * (sigma(a - b, t) + sigma(a + b, t))
}

pub fn sin_sin(a: f64, b: f64, t: f64) -> f64 {
    0.5 * (sigma(a - b, t) - sigma(a + b, t))
}

/// `∫₀ᵀ sin(as)cos(bs) ds`.
pub fn sin_cos(a: f64, b: f64, t: f64) -> f64 {
    0.5 * (kappa(a + b, t) + kappa(a - b, t))
}
