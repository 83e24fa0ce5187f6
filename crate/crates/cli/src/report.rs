//! Run reports, verdicts and CSV tables.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{LabError, LabResult};

/// Outcome of one named criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub criterion: String,
    pub passed: bool,
    #[serde(deserialize_with = "lenient::number")]
    pub measured: f64,
    #[serde(deserialize_with = "lenient::number")]
    pub threshold: f64,
    pub detail: String,
}

impl Verdict {
    /// Passes when `measured ≤ threshold`.
    pub fn at_most(criterion: &str, measured: f64, threshold: f64, detail: String) -> Self {
        Self { criterion: criterion.into(), passed: measured <= threshold, measured, threshold, detail }
    }

    /// Passes when `measured ≥ threshold`.
    pub fn at_least(criterion: &str, measured: f64, threshold: f64, detail: String) -> Self {
        Self { criterion: criterion.into(), passed: measured >= threshold, measured, threshold, detail }
    }
}

/// Metrics of one degree (or dimension, for moment runs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeMetrics {
    pub p: usize,
    #[serde(deserialize_with = "lenient::numbers")]
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub weight_hash: String,
    /// False when a stage failed; the outputs present are then partial.
    pub complete: bool,
    pub error: Option<String>,
    pub started: String,
    pub wall_clock_seconds: f64,
    pub threads: usize,
    pub cache_hits: usize,
    pub cache_misses: usize,
    pub metrics: Vec<DegreeMetrics>,
    #[serde(deserialize_with = "lenient::numbers")]
    pub summary: BTreeMap<String, f64>,
    pub verdicts: Vec<Verdict>,
    pub artifacts: Vec<String>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.complete && self.verdicts.iter().all(|v| v.passed)
    }

    pub fn load(dir: &Path) -> LabResult<Self> {
        let path = dir.join(REPORT_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| LabError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))
    }

    /// Human-readable summary, one line per verdict.
    pub fn render(&self) -> String {
        let c = &self.config;
        let subject = if c.kind == ExperimentKind::Moments {
            format!("{}, ν = {}", c.measure, c.run.nu)
        } else {
            format!("{} ({}x{})", c.weight.descriptor, c.grid.n_r, c.grid.n_theta)
        };
        let mut out = format!(
            "{:?} on {subject}, seed {}, {:.2}s on {} threads{}\n",
            c.kind,
            c.run.seed,
            self.wall_clock_seconds,
            self.threads,
            if self.complete { "" } else { ", INCOMPLETE" },
        );
        if let Some(e) = &self.error {
            out.push_str(&format!("error: {e}\n"));
        }
        for m in &self.metrics {
            let vals: Vec<String> = m.values.iter().map(|(k, v)| format!("{k}={v:.6e}")).collect();
            let index = if c.kind == ExperimentKind::Moments { "k" } else { "p" };
            out.push_str(&format!("  {index}={:<5} {}\n", m.p, vals.join(" ")));
        }
        for (k, v) in &self.summary {
            out.push_str(&format!("  {k} = {v:.6e}\n"));
        }
        for v in &self.verdicts {
            out.push_str(&format!(
                "[{}] {}: measured {:.6e}, threshold {:.6e} ({})\n",
                if v.passed { "PASS" } else { "FAIL" },
                v.criterion,
                v.measured,
                v.threshold,
                v.detail
            ));
        }
        out
    }
}

/// JSON has no NaN or infinity; serde_json writes them as `null`, which
/// is read back as NaN.
mod lenient {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer};

    pub fn number<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }

    pub fn numbers<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
        let raw = BTreeMap::<String, Option<f64>>::deserialize(d)?;
        Ok(raw.into_iter().map(|(k, v)| (k, v.unwrap_or(f64::NAN))).collect())
    }
}

pub const REPORT_FILE: &str = "report.json";
pub const CONFIG_FILE: &str = "config.toml";

/// Formats a number with 17 significant digits, enough to recover the
/// exact double.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// An in-memory CSV table written at the end of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path) -> LabResult<String> {
        let path = dir.join(&self.name);
        let io = |e: std::io::Error| LabError::io(&path, e);
        let mut w = csv::Writer::from_path(&path).map_err(|e| io(e.into()))?;
        w.write_record(&self.header).map_err(|e| io(e.into()))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| io(e.into()))?;
        }
        w.flush().map_err(io)?;
        Ok(self.name.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip_exactly() {
        for x in [0.1, 1.0 / 3.0, std::f64::consts::PI * 1e-300, -2.5e17, f64::MIN_POSITIVE, 0.0] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(num(1.0), "1.0000000000000000e0");
        assert_eq!(num(f64::INFINITY), "inf");
    }
}
