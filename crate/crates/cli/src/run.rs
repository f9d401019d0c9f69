//! Mode dispatch: builds the sweep, writes CSV and JSON, evaluates gates.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use schrod_spde::functional::{low_pass_direction, TestFunctional};
use schrod_spde::harness::ErrorRecord;
use schrod_spde::law::{gaussian_functional, FunctionalKind};
use schrod_spde::noise::CovarianceSpec;
use schrod_spde::selftest::run_all;
use schrod_spde::spectral::{stochastic_convolution_law, InitialProfile};
use schrod_spde::sweep::{fit_column, fit_column_windowed, Columns, McParams, Sweep};

use crate::config::{ExperimentConfig, Mode, Phi};
use crate::output::{read_csv, write_csv, CrossCheckRow, FitOutcome, Gate, Summary, SCHEMA};

pub type BoxError = Box<dyn std::error::Error>;

pub fn json_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn functional(cfg: &ExperimentConfig) -> Result<TestFunctional, BoxError> {
    let v = low_pass_direction(cfg.modes, cfg.support);
    Ok(match cfg.phi {
        Phi::Cos => TestFunctional::cos_pairing(v)?,
        Phi::Linear => TestFunctional::linear_pairing(v)?,
        Phi::Bump => TestFunctional::gauss_bump(cfg.bump_sigma)?,
    })
}

fn columns(mode: Mode) -> Columns {
    match mode {
        Mode::Rates => Columns { deterministic: true, strong_exact: true, weak_exact: true, ..Columns::default() },
        Mode::ExactWeak => Columns { weak_exact: true, ..Columns::default() },
        Mode::ExactStrong => Columns { strong_exact: true, ..Columns::default() },
        Mode::Deterministic => Columns { deterministic: true, ..Columns::default() },
        Mode::McCrosscheck => Columns { strong_exact: true, weak_exact: true, strong_mc: true, ..Columns::default() },
        Mode::Selftest => Columns::default(),
    }
}

pub fn build_sweep(mode: Mode, cfg: &ExperimentConfig) -> Result<Sweep, BoxError> {
    let spec = if mode == Mode::Deterministic {
        CovarianceSpec::noiseless(cfg.modes, cfg.theta)?
    } else {
        CovarianceSpec::new(cfg.modes, cfg.theta, cfg.rho, cfg.scales[0], cfg.scales[1])?
    };
    Ok(Sweep {
        spec,
        final_time: cfg.final_time,
        meshes: cfg.mesh.clone(),
        profile: InitialProfile::Parabola,
        functional: functional(cfg)?,
        columns: columns(mode),
        mc: McParams { samples: cfg.samples, steps: cfg.steps, seed: cfg.seed },
        timing: cfg.timing,
    })
}

type Column = (&'static str, fn(&ErrorRecord) -> Option<f64>);

const FIT_COLUMNS: [Column; 5] = [
    ("strong_exact", |r| r.strong_exact),
    ("strong_mc", |r| r.strong_mc),
    ("weak_exact", |r| r.weak_exact),
    ("weak_mc", |r| r.weak_mc),
    ("det_error", |r| r.det_error),
];

/// Fits of every fully populated column of the CSV.
pub fn fits_from_csv(bytes: &[u8]) -> Result<BTreeMap<&'static str, FitOutcome>, BoxError> {
    let rows = read_csv(bytes)?;
    Ok(FIT_COLUMNS.iter().filter_map(|(name, col)| fit_column(&rows, col).map(|f| (*name, FitOutcome::from(f)))).collect())
}

fn gate(gates: &mut Vec<Gate>, name: impl Into<String>, passed: bool, detail: String) {
    let name = name.into();
    println!("{} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    gates.push(Gate { name, passed, detail });
}

fn rate_gates(cfg: &ExperimentConfig, sweep: &Sweep, rows: &[ErrorRecord], fits: &BTreeMap<&str, FitOutcome>, gates: &mut Vec<Gate>) {
    let theta = cfg.theta;
    let slope = |k: &str| fits.get(k).and_then(|f| f.fit()).map(|f| f.slope);
    match (slope("weak_exact"), slope("strong_exact")) {
        (Some(w), Some(s)) => {
            let (lo, hi) = (2.0 * theta - 0.2, 2.0 * theta + 0.3);
            gate(gates, "weak slope", (lo..=hi).contains(&w), format!("{w:.4} (want [{lo:.2}, {hi:.2}])"));
            let (lo, hi) = (theta - 0.15, theta + 0.25);
            gate(gates, "strong slope", (lo..=hi).contains(&s), format!("{s:.4} (want [{lo:.2}, {hi:.2}])"));
            gate(gates, "rate doubling", w >= 2.0 * s - 0.25, format!("weak {w:.4} >= 2*strong - 0.25 = {:.4}", 2.0 * s - 0.25));
        }
        _ => gate(gates, "rate fits", false, "weak or strong fit unavailable".into()),
    }
    let strong: Vec<f64> = rows.iter().filter_map(|r| r.strong_exact).collect();
    let monotone = strong.windows(2).all(|w| w[1] <= w[0]);
    gate(gates, "strong error monotone in N", monotone, strong.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(" > "));
    match sweep.initial_data().and_then(|x0| {
        let law = stochastic_convolution_law(sweep.final_time, &sweep.spec, &x0)?;
        let m2 = gaussian_functional(&law, &[], FunctionalKind::SquaredNorm)?;
        Ok((m2 - (x0.norm().powi(2) + sweep.final_time * sweep.spec.trace_q())).abs())
    }) {
        Ok(err) => gate(gates, "squared-norm identity", err <= 1e-10, format!("{err:.3e} (want <= 1e-10)")),
        Err(e) => gate(gates, "squared-norm identity", false, e.to_string()),
    }
}

fn run_selftest(cfg: &ExperimentConfig, start: Instant) -> Result<bool, BoxError> {
    let mut gates = Vec::new();
    for report in run_all(cfg.seed)? {
        for c in &report.checks {
            gate(&mut gates, format!("{}/{}", report.suite, c.name), c.passed, c.detail.clone());
        }
    }
    let passed = gates.iter().all(|g| g.passed);
    let summary = Summary {
        schema: SCHEMA,
        mode: Mode::Selftest,
        config: cfg,
        rows: 0,
        fits: BTreeMap::new(),
        windowed: BTreeMap::new(),
        k_check: None,
        crosscheck: Vec::new(),
        gates,
        passed,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    write_json(&json_path(&cfg.out), &summary)?;
    Ok(passed)
}

fn write_json(path: &Path, summary: &Summary) -> Result<(), BoxError> {
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| format!("writing {}: {e}", path.display()))?;
    Ok(())
}

/// Runs `mode`; `Ok(true)` iff all gated checks passed.
pub fn run(mode: Mode, cfg: &ExperimentConfig) -> Result<bool, BoxError> {
    let start = Instant::now();
    if mode == Mode::Selftest {
        return run_selftest(cfg, start);
    }
    let sweep = build_sweep(mode, cfg)?;
    let mut rows = Vec::with_capacity(cfg.mesh.len());
    for &n in &cfg.mesh {
        let row = sweep.run_row(n).map_err(|e| format!("row N = {n} (theta = {}, J = {}): {e}", cfg.theta, cfg.modes))?;
        log::info!("N = {n} done");
        rows.push(row);
    }
    let csv = write_csv(&rows)?;
    std::fs::write(&cfg.out, &csv).map_err(|e| format!("writing {}: {e}", cfg.out.display()))?;

    let fits = fits_from_csv(&csv)?;
    let floor = sweep.floor()?;
    let mut windowed = BTreeMap::new();
    let strong_floor = |x: f64| floor.strong(x);
    let weak_floor = |_: f64| floor.weak(&sweep.functional);
    if let Some(f) = fit_column_windowed(&rows, |r| r.strong_exact, strong_floor) {
        windowed.insert("strong_exact", FitOutcome::from(f));
    }
    if let Some(f) = fit_column_windowed(&rows, |r| r.weak_exact, weak_floor) {
        windowed.insert("weak_exact", FitOutcome::from(f));
    }
    for (name, fit) in &fits {
        match fit {
            FitOutcome::Fit(f) => println!("fit {name}: slope {:.4}, R^2 {:.4}", f.slope, f.r_squared),
            FitOutcome::Error { error } => println!("fit {name}: unavailable ({error})"),
        }
    }

    let k_check = match mode {
        Mode::McCrosscheck | Mode::Rates => Some(sweep.k_doubling(cfg.steps, 6)?),
        _ => None,
    };
    if let Some(k) = &k_check {
        if !k.converged {
            log::warn!("time rule did not settle to 5% within the doubling budget: {:?}", k.history);
        }
    }
    let crosscheck = if mode == Mode::McCrosscheck {
        rows.iter()
            .map(|r| CrossCheckRow {
                nodes: r.nodes,
                strong_z: match (r.strong_mc, r.strong_stderr, r.strong_exact) {
                    (Some(m), Some(s), Some(e)) if s > 0.0 => Some((m - e) / s),
                    _ => None,
                },
                weak_z: match (r.weak_mc, r.weak_stderr, r.weak_exact) {
                    (Some(m), Some(s), Some(e)) if s > 0.0 => Some((m - e) / s),
                    _ => None,
                },
            })
            .collect()
    } else {
        Vec::new()
    };

    let mut gates = Vec::new();
    if mode == Mode::Rates {
        rate_gates(cfg, &sweep, &rows, &fits, &mut gates);
    }
    let passed = gates.iter().all(|g| g.passed);
    let summary = Summary {
        schema: SCHEMA,
        mode,
        config: cfg,
        rows: rows.len(),
        fits,
        windowed,
        k_check,
        crosscheck,
        gates,
        passed,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    write_json(&json_path(&cfg.out), &summary)?;
    Ok(passed)
}
