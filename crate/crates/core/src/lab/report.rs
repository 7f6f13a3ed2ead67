//! Reports, checks, exit codes and artifact output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SCHEMA};
use super::svg::Plot;
use super::write_atomic;
use crate::error::{LabError, Result};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CHECK: i32 = 2;
pub const EXIT_HYPOTHESIS: i32 = 3;
pub const EXIT_DEGENERATE: i32 = 4;

/// Process exit code for an error that stopped a command.
pub fn exit_code_for(err: &LabError) -> i32 {
    match err {
        LabError::Hypothesis(_) => EXIT_HYPOTHESIS,
        LabError::Degenerate(_) | LabError::NoConvergence { .. } | LabError::SingularIntegrand(_) => EXIT_DEGENERATE,
        LabError::CheckFailed(_) | LabError::Structure(_) => EXIT_CHECK,
        LabError::Config(_)
        | LabError::Io(_)
        | LabError::Json(_)
        | LabError::Domain(_)
        | LabError::Unsupported(_)
        | LabError::Truncation { .. }
        | LabError::UndefinedAtIdentity
        | LabError::EmptySamples => EXIT_USAGE,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool) -> Self {
        Check { name: name.into(), passed, value: None, tolerance: None, detail: String::new() }
    }

    /// Passes when `value < tolerance` (NaN fails).
    pub fn below(name: &str, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), passed: value < tolerance, value: Some(value), tolerance: Some(tolerance), detail: String::new() }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

/// One row of the cross-K order table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderRow {
    pub entry: String,
    pub k: f64,
    pub sqrt_k: f64,
    pub slope: f64,
    pub fit_residual: f64,
    pub ratio: f64,
    pub known_order: Option<u32>,
    /// `κ(κ + n − 2)` for Euclidean spherical harmonics.
    pub lambda_kappa: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: u32,
    pub command: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub checks: Vec<Check>,
    pub fitted: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub order_rows: Vec<OrderRow>,
    pub artifacts: Vec<String>,
    pub passed: bool,
    pub exit_code: i32,
}

impl ExperimentReport {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        ExperimentReport {
            schema: SCHEMA,
            command: command.into(),
            config_hash: config.hash(),
            config: config.clone(),
            checks: Vec::new(),
            fitted: BTreeMap::new(),
            order_rows: Vec::new(),
            artifacts: Vec::new(),
            passed: true,
            exit_code: EXIT_PASS,
        }
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn fit(&mut self, name: impl Into<String>, v: f64) {
        self.fitted.insert(name.into(), v);
    }

    pub fn finalize(&mut self) {
        self.passed = self.checks.iter().all(|c| c.passed);
        self.exit_code = if self.passed { EXIT_PASS } else { EXIT_CHECK };
    }

    pub fn failed_checks(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }
}

/// Artifact sink rooted at the output directory; every write is atomic.
pub struct Output {
    pub dir: PathBuf,
    pub written: Vec<String>,
}

impl Output {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Output { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        self.written.push(name.to_string());
        Ok(path)
    }

    /// Serializes rows with a header and returns the CSV text.
    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<String> {
        let text = csv_text(rows)?;
        self.bytes(name, text.as_bytes())?;
        Ok(text)
    }

    pub fn svg(&mut self, name: &str, plot: &Plot) -> Result<()> {
        self.bytes(name, plot.render().as_bytes()).map(|_| ())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_vec_pretty(value)?;
        text.push(b'\n');
        self.bytes(name, &text).map(|_| ())
    }
}

pub fn csv_text<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| LabError::Config(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| LabError::Config(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// File-name-safe form of an entry id.
pub fn slug(id: &str) -> String {
    let mut s: String = id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' }).collect();
    while s.contains("__") {
        s = s.replace("__", "_");
    }
    s.trim_matches('_').to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        r: f64,
        n: Option<f64>,
    }

    #[test]
    fn csv_rows_and_empty_cells() {
        let text = csv_text(&[Row { r: 0.1, n: Some(2.0) }, Row { r: 0.2, n: None }]).unwrap();
        assert_eq!(text, "r,n\n0.1,2.0\n0.2,\n");
    }

    #[test]
    fn slugs_are_safe() {
        assert_eq!(slug("heisenberg1/radial-eig?lambda=16"), "heisenberg1_radial_eig_lambda_16");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code_for(&LabError::Hypothesis("a".into())), EXIT_HYPOTHESIS);
        assert_eq!(exit_code_for(&LabError::Degenerate("a".into())), EXIT_DEGENERATE);
        assert_eq!(exit_code_for(&LabError::Config("a".into())), EXIT_USAGE);
        assert_eq!(exit_code_for(&LabError::CheckFailed("a".into())), EXIT_CHECK);
    }
}
