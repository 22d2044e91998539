//! Named residual reports with tolerances and pass/fail verdicts,
//! serializable to JSON and CSV.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// One named check: the maximum residual observed over a sample set, the
/// tolerance it is held to, and the verdict.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub samples: usize,
    pub pass: bool,
    /// Free-form context: family, seed, fd_step, …  BTreeMap keeps the JSON
    /// field order deterministic.
    pub metadata: BTreeMap<String, String>,
}

impl CheckReport {
    pub fn new(name: &str, max_residual: f64, tolerance: f64, samples: usize) -> Self {
        Self {
            name: name.to_string(),
            max_residual,
            tolerance,
            samples,
            pass: max_residual <= tolerance,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    /// An informational entry: recorded but never failing.
    pub fn informational(name: &str, value: f64, samples: usize) -> Self {
        let mut r = Self::new(name, value, f64::INFINITY, samples);
        r.pass = true;
        r
    }
}

/// CSV header matching [`to_csv_row`].
pub const CSV_HEADER: &str = "name,max_residual,tolerance,samples,pass";

pub fn to_csv_row(r: &CheckReport) -> String {
    format!(
        "{},{:.17e},{:.17e},{},{}",
        r.name, r.max_residual, r.tolerance, r.samples, r.pass
    )
}

/// Versioned report envelope written by the CLI.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportEnvelope {
    pub schema: u32,
    pub config: BTreeMap<String, String>,
    pub checks: Vec<CheckReport>,
}

impl ReportEnvelope {
    pub fn new(config: BTreeMap<String, String>, checks: Vec<CheckReport>) -> Self {
        Self {
            schema: 1,
            config,
            checks,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for c in &self.checks {
            out.push_str(&to_csv_row(c));
            out.push('\n');
        }
        out
    }
}
