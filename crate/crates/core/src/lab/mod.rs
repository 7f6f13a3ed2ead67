//! Experiment runner: configs, reports, CSV and SVG output.

mod commands;
pub mod config;
pub mod report;
pub mod svg;

use std::path::Path;

pub use commands::{exit_code, run, run_report, Command, CrossKRow, Summary, SummaryInput};
pub use config::{AlphaPolicy, DiniParams, ExperimentConfig, IdentityLevel, PipelineConfig, SolverConfig, Tolerances};
pub use report::{Check, ExperimentReport, OrderRow};

use crate::error::Result;

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    std::io::Write::write_all(&mut tmp, bytes)?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
