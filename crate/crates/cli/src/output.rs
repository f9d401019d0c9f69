//! CSV rows (schema 1) and the JSON summary.

use std::collections::BTreeMap;

use schrod_spde::harness::ErrorRecord;
use schrod_spde::rate::RateFit;
use schrod_spde::sweep::KCheck;
use serde::Serialize;

use crate::config::{ExperimentConfig, Mode};

pub const SCHEMA: u32 = 1;

pub const HEADER: [&str; 13] = [
    "h",
    "N",
    "J",
    "theta",
    "T",
    "strong_exact",
    "strong_mc",
    "strong_stderr",
    "weak_exact",
    "weak_mc",
    "weak_stderr",
    "det_error",
    "seconds",
];

/// Shortest representation that parses back to the same `f64`.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn write_csv(records: &[ErrorRecord]) -> Result<Vec<u8>, csv::Error> {
    let mut buf = format!("# schema={SCHEMA}\n").into_bytes();
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut buf);
        w.write_record(HEADER)?;
        for r in records {
            w.write_record([
                num(r.h),
                r.nodes.to_string(),
                r.modes.to_string(),
                num(r.theta),
                num(r.final_time),
                opt(r.strong_exact),
                opt(r.strong_mc),
                opt(r.strong_stderr),
                opt(r.weak_exact),
                opt(r.weak_mc),
                opt(r.weak_stderr),
                opt(r.det_error),
                opt(r.seconds),
            ])?;
        }
        w.flush()?;
    }
    Ok(buf)
}

#[derive(Debug)]
pub struct CsvError(pub String);

impl std::fmt::Display for CsvError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CsvError {}

/// Reads rows back from schema-1 CSV bytes.
pub fn read_csv(bytes: &[u8]) -> Result<Vec<ErrorRecord>, CsvError> {
    let text = std::str::from_utf8(bytes).map_err(|e| CsvError(format!("CSV is not UTF-8: {e}")))?;
    let (first, rest) = text.split_once('\n').ok_or_else(|| CsvError("empty CSV".into()))?;
    if first.trim() != format!("# schema={SCHEMA}") {
        return Err(CsvError(format!("unsupported schema line {first:?}")));
    }
    let mut rdr = csv::Reader::from_reader(rest.as_bytes());
    let headers = rdr.headers().map_err(|e| CsvError(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(CsvError(format!("unexpected header {headers:?}")));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CsvError(e.to_string()))?;
        let field = |i: usize| -> Result<Option<f64>, CsvError> {
            let s = &rec[i];
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| CsvError(format!("row {}: column {} = {s:?} is not a number", line + 1, HEADER[i])))
            }
        };
        let int = |i: usize| -> Result<usize, CsvError> {
            rec[i].parse().map_err(|_| CsvError(format!("row {}: column {} is not an integer", line + 1, HEADER[i])))
        };
        let need = |i: usize| field(i)?.ok_or_else(|| CsvError(format!("row {}: column {} is empty", line + 1, HEADER[i])));
        out.push(ErrorRecord {
            h: need(0)?,
            nodes: int(1)?,
            modes: int(2)?,
            theta: need(3)?,
            final_time: need(4)?,
            strong_exact: field(5)?,
            strong_mc: field(6)?,
            strong_stderr: field(7)?,
            weak_exact: field(8)?,
            weak_mc: field(9)?,
            weak_stderr: field(10)?,
            det_error: field(11)?,
            seconds: field(12)?,
        });
    }
    Ok(out)
}

/// A fit or the reason it could not be made.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum FitOutcome {
    Fit(RateFit),
    Error { error: String },
}

impl FitOutcome {
    pub fn fit(&self) -> Option<&RateFit> {
        match self {
            FitOutcome::Fit(f) => Some(f),
            FitOutcome::Error { .. } => None,
        }
    }
}

impl<E: std::fmt::Display> From<Result<RateFit, E>> for FitOutcome {
    fn from(r: Result<RateFit, E>) -> Self {
        match r {
            Ok(f) => FitOutcome::Fit(f),
            Err(e) => FitOutcome::Error { error: e.to_string() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gate {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCheckRow {
    #[serde(rename = "N")]
    pub nodes: usize,
    pub strong_z: Option<f64>,
    pub weak_z: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub schema: u32,
    pub mode: Mode,
    pub config: &'a ExperimentConfig,
    pub rows: usize,
    /// Fits over every CSV row, keyed by column name.
    pub fits: BTreeMap<&'static str, FitOutcome>,
    /// Fits excluding rows within 100x of the truncation floor.
    pub windowed: BTreeMap<&'static str, FitOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_check: Option<KCheck>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub crosscheck: Vec<CrossCheckRow>,
    pub gates: Vec<Gate>,
    pub passed: bool,
    pub wall_seconds: f64,
}
