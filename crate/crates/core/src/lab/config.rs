//! Versioned experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algebra::AlgebraDoc;
use crate::error::{LabError, Result};
use crate::frequency::MONOTONICITY_TOL;
use crate::geometry::DiniModulus;
use crate::quadrature::QuadratureSpec;
use crate::solver::SolverOptions;

pub const SCHEMA: u32 = 1;

/// How the weight exponent is chosen per entry.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum AlphaPolicy {
    #[default]
    SqrtK,
    Explicit(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiniParams {
    pub kappa: f64,
    pub beta: f64,
}

impl Default for DiniParams {
    fn default() -> Self {
        DiniParams { kappa: 1.0, beta: 1.0 }
    }
}

impl DiniParams {
    pub fn modulus(&self) -> Result<DiniModulus> {
        DiniModulus::new(self.kappa, self.beta)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Derivative identities and Rellich balance.
    pub identity: f64,
    pub monotonicity: f64,
    /// Fitted slope against a known vanishing order.
    pub order: f64,
    /// Cross-K spread of `slope / √K`.
    pub order_spread: f64,
    /// Spread of `κ / √λ_κ` over `κ ≥ 3`.
    pub calibration_spread: f64,
    pub quantization: f64,
    pub solver_order: f64,
    pub pipeline: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity: 2e-2,
            monotonicity: MONOTONICITY_TOL,
            order: 0.05,
            order_spread: 0.25,
            calibration_spread: 0.10,
            quantization: 1e-2,
            solver_order: 1.5,
            pipeline: 5e-2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Half-widths of the centred box.
    pub half: [f64; 3],
    /// Intervals on x and y; t gets twice as many.
    pub intervals: usize,
    pub r_grid: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Catalog oracle providing boundary data and potential.
    pub entry: String,
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    /// Interval counts of the refinement study.
    pub levels: Vec<usize>,
    #[serde(default)]
    pub options: SolverOptions,
    #[serde(default)]
    pub pipeline: Option<PipelineConfig>,
    /// Write the finest solution as raw `f64` plus a JSON header.
    #[serde(default)]
    pub dump: bool,
}

/// One level of the identity refinement study.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityLevel {
    pub resolution: usize,
    /// Difference step in `r`.
    pub step: f64,
}

fn default_geometry() -> String {
    "heisenberg:1".into()
}

fn default_quadrature() -> QuadratureSpec {
    QuadratureSpec::uniform(48)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    #[serde(default = "default_geometry")]
    pub geometry: String,
    /// Explicit algebra checked by the identity command instead of `geometry`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algebra: Option<AlgebraDoc>,
    #[serde(default)]
    pub entries: Vec<String>,
    /// Generates entries when `entries` is empty (see the README).
    #[serde(default)]
    pub k_list: Vec<f64>,
    #[serde(default)]
    pub alpha: AlphaPolicy,
    #[serde(default)]
    pub allow_alpha_mismatch: bool,
    #[serde(default)]
    pub dini: DiniParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_grid: Option<Vec<f64>>,
    #[serde(default = "default_quadrature")]
    pub quadrature: QuadratureSpec,
    /// Resolution factor of the stability rerun in `monotonicity`.
    #[serde(default = "default_refine")]
    pub refine: [usize; 2],
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Refinement levels for the identity study in `frequency`; empty skips it.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub identity_levels: Vec<IdentityLevel>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub identity_radii: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cbar_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_window: Option<Vec<f64>>,
    /// Random points for the identity suite.
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_refine() -> [usize; 2] {
    [3, 2]
}

fn default_points() -> usize {
    crate::identities::DEFAULT_POINTS
}

impl ExperimentConfig {
    /// A config with defaults for everything but the geometry.
    pub fn new(geometry: &str) -> Self {
        serde_json::from_value(serde_json::json!({ "schema": SCHEMA, "geometry": geometry })).expect("default config")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text)?;
        match raw.get("schema").and_then(|s| s.as_u64()) {
            Some(s) if s == SCHEMA as u64 => {}
            Some(s) => return Err(LabError::Config(format!("unsupported schema {s}, expected {SCHEMA}"))),
            None => return Err(LabError::Config("config lacks \"schema\"".into())),
        }
        let cfg: ExperimentConfig = serde_json::from_value(raw).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        ExperimentConfig::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(g) = &self.r_grid {
            if g.is_empty() || g.windows(2).any(|w| w[1] <= w[0]) || g.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
                return Err(LabError::Config("r_grid must be increasing inside (0, 1)".into()));
            }
        }
        if let AlphaPolicy::Explicit(a) = self.alpha {
            if !(a > 0.0) {
                return Err(LabError::Config("explicit alpha must be positive".into()));
            }
        }
        if self.k_list.iter().any(|&k| !(k >= 1.0)) {
            return Err(LabError::Config("k_list values must be at least 1".into()));
        }
        if self.refine[0] == 0 || self.refine[1] == 0 {
            return Err(LabError::Config("refine factors must be positive".into()));
        }
        if !self.identity_levels.is_empty() {
            if self.identity_radii.is_empty() {
                return Err(LabError::Config("identity_levels need identity_radii".into()));
            }
            for l in &self.identity_levels {
                if !(l.step > 0.0) || self.identity_radii.iter().any(|&r| !(r - 2.0 * l.step > 0.0)) {
                    return Err(LabError::Config(format!("identity step {} too large for the radii", l.step)));
                }
                QuadratureSpec::uniform(l.resolution).validate()?;
            }
        }
        self.quadrature.validate()?;
        self.dini.modulus()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}
