//! Log-log least-squares rate fits.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Indices (into the input) used by the fit.
    pub points: Vec<usize>,
    /// Indices flagged as within `100×` of their floor and left out.
    pub excluded: Vec<usize>,
}

/// Points whose error is below this multiple of the floor are excluded.
pub const FLOOR_FACTOR: f64 = 100.0;

/// Ordinary least squares of `log(error)` on `log(h)`.
pub fn fit_rate(h: &[f64], errors: &[f64]) -> Result<RateFit> {
    fit_rate_with_floor(h, errors, None)
}

pub fn fit_rate_with_floor(h: &[f64], errors: &[f64], floors: Option<&[f64]>) -> Result<RateFit> {
    if h.len() != errors.len() {
        return Err(Error::DimensionMismatch { context: "fit_rate h vs errors", expected: h.len(), found: errors.len() });
    }
    if let Some(f) = floors {
        if f.len() != h.len() {
            return Err(Error::DimensionMismatch { context: "fit_rate floors", expected: h.len(), found: f.len() });
        }
    }
    for (i, &e) in errors.iter().enumerate() {
        if !(e > 0.0) || !e.is_finite() {
            return Err(Error::domain(format!("error at index {i} must be strictly positive and finite, got {e}")));
        }
    }
    for i in 0..h.len() {
        if !(h[i] > 0.0) {
            return Err(Error::domain(format!("h at index {i} must be positive, got {}", h[i])));
        }
        if i > 0 && !(h[i] < h[i - 1]) {
            return Err(Error::domain(format!("h must be strictly decreasing; index {i} violates it")));
        }
    }
    let mut points = Vec::new();
    let mut excluded = Vec::new();
    for i in 0..h.len() {
        match floors {
            Some(f) if errors[i] < FLOOR_FACTOR * f[i] => {
                log::warn!("rate fit: point {i} (h = {}) is within {FLOOR_FACTOR}x of its truncation floor; excluded", h[i]);
                excluded.push(i);
            }
            _ => points.push(i),
        }
    }
    if points.len() < 3 {
        return Err(Error::domain(format!("rate fit needs at least 3 usable points, got {}", points.len())));
    }
    let xs: Vec<f64> = points.iter().map(|&i| h[i].ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&i| errors[i].ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(RateFit { slope, intercept, r_squared, points, excluded })
}
