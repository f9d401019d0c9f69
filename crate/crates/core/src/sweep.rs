//! Mesh sweeps: one [`ErrorRecord`] per mesh size, plus rate fits over the
//! populated columns.

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::Discretization;
use crate::functional::TestFunctional;
use crate::harness::{deterministic_error, exact_strong_error, exact_weak_error, time_rule_strong_error, ErrorRecord, TruncationFloor};
use crate::mc::{mc_estimate, mc_weak_estimate};
use crate::noise::CovarianceSpec;
use crate::rate::{fit_rate, fit_rate_with_floor, RateFit};
use crate::spectral::{InitialProfile, SpectralCoeffs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Columns {
    pub deterministic: bool,
    pub strong_exact: bool,
    pub weak_exact: bool,
    /// Strong and weak Monte Carlo (full path).
    pub strong_mc: bool,
    /// Weak Monte Carlo only (fast path for pairing functionals).
    pub weak_mc: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McParams {
    pub samples: usize,
    pub steps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub spec: CovarianceSpec,
    pub final_time: f64,
    pub meshes: Vec<usize>,
    pub profile: InitialProfile,
    pub functional: TestFunctional,
    pub columns: Columns,
    pub mc: McParams,
    pub timing: bool,
}

impl Sweep {
    pub fn modes(&self) -> usize {
        self.spec.modes()
    }

    pub fn initial_data(&self) -> Result<SpectralCoeffs> {
        SpectralCoeffs::real(self.profile.sine_coefficients(self.modes()))
    }

    pub fn run_row(&self, nodes: usize) -> Result<ErrorRecord> {
        let start = Instant::now();
        let d = Discretization::new(nodes, self.modes())?;
        let x0 = self.initial_data()?;
        let t = self.final_time;
        let mut r = ErrorRecord::new(&d, self.spec.theta(), t);
        let c = self.columns;
        if c.deterministic {
            r.det_error = Some(deterministic_error(t, &x0, &d)?);
        }
        if c.strong_exact {
            r.strong_exact = Some(exact_strong_error(t, &self.spec, &x0, &d)?);
        }
        if c.weak_exact {
            r.weak_exact = Some(exact_weak_error(t, &self.spec, &x0, &d, &self.functional)?);
        }
        let McParams { samples, steps, seed } = self.mc;
        if c.strong_mc {
            let mc = mc_estimate(t, &self.spec, &x0, &d, &self.functional, samples, steps, seed)?;
            r.strong_mc = Some(mc.strong);
            r.strong_stderr = Some(mc.strong_stderr);
            r.weak_mc = Some(mc.weak.value);
            r.weak_stderr = Some(mc.weak.stderr);
        } else if c.weak_mc {
            let w = mc_weak_estimate(t, &self.spec, &x0, &d, &self.functional, samples, steps, seed)?;
            r.weak_mc = Some(w.value);
            r.weak_stderr = Some(w.stderr);
        }
        if self.timing {
            r.seconds = Some(start.elapsed().as_secs_f64());
        }
        r.validate().map_err(|e| Error::Divergent(format!("row N = {nodes}: {e}")))?;
        Ok(r)
    }

    /// Rows in mesh order.
    pub fn run(&self) -> Result<Vec<ErrorRecord>> {
        self.meshes.iter().map(|&n| self.run_row(n)).collect()
    }

    pub fn floor(&self) -> Result<TruncationFloor> {
        TruncationFloor::new(&self.spec, self.final_time)
    }

    /// Doubles `K` from `start` until the time-rule strong error changes by
    /// less than 5%, at the finest mesh.
    pub fn k_doubling(&self, start: usize, max_doublings: usize) -> Result<KCheck> {
        let nodes = *self.meshes.last().ok_or_else(|| Error::domain("empty mesh list"))?;
        let d = Discretization::new(nodes, self.modes())?;
        let x0 = self.initial_data()?;
        let mut history = vec![(start, time_rule_strong_error(self.final_time, &self.spec, &x0, &d, start)?)];
        let mut k = start;
        for _ in 0..max_doublings {
            let prev = history.last().expect("nonempty").1;
            if history.len() > 1 && (history[history.len() - 2].1 - prev).abs() < K_TOL * prev {
                break;
            }
            k *= 2;
            history.push((k, time_rule_strong_error(self.final_time, &self.spec, &x0, &d, k)?));
        }
        let n = history.len();
        let converged = n > 1 && (history[n - 2].1 - history[n - 1].1).abs() < K_TOL * history[n - 1].1;
        let exact = exact_strong_error(self.final_time, &self.spec, &x0, &d)?;
        Ok(KCheck { nodes, history, converged, exact, requested_steps: self.mc.steps })
    }
}

/// Relative change below which doubling `K` stops.
pub const K_TOL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KCheck {
    pub nodes: usize,
    /// `(K, expected MC strong error)`.
    pub history: Vec<(usize, f64)>,
    pub converged: bool,
    pub exact: f64,
    pub requested_steps: usize,
}

impl KCheck {
    /// Relative time-rule bias of the configured `K`, if it appears in the history.
    pub fn bias_at_requested(&self) -> Option<f64> {
        self.history.iter().find(|(k, _)| *k == self.requested_steps).map(|(_, v)| (v - self.exact).abs() / self.exact)
    }
}

/// Column extractors shared by rate fits and the CSV writer.
pub fn hs(records: &[ErrorRecord]) -> Vec<f64> {
    records.iter().map(|r| r.h).collect()
}

/// Fit of a column over all rows; `None` when the column is not populated in every row.
pub fn fit_column(records: &[ErrorRecord], column: impl Fn(&ErrorRecord) -> Option<f64>) -> Option<Result<RateFit>> {
    let values: Option<Vec<f64>> = records.iter().map(&column).collect();
    values.map(|v| fit_rate(&hs(records), &v.iter().map(|x| x.abs()).collect::<Vec<_>>()))
}

/// Fit restricted to rows whose value is above `100×` the per-row floor.
pub fn fit_column_windowed(
    records: &[ErrorRecord],
    column: impl Fn(&ErrorRecord) -> Option<f64>,
    floor: impl Fn(f64) -> f64,
) -> Option<Result<RateFit>> {
    let values: Option<Vec<f64>> = records.iter().map(&column).collect();
    values.map(|v| {
        let abs: Vec<f64> = v.iter().map(|x| x.abs()).collect();
        let floors: Vec<f64> = abs.iter().map(|&x| floor(x)).collect();
        fit_rate_with_floor(&hs(records), &abs, Some(&floors))
    })
}
