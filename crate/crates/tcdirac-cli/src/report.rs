//! Run report: per-stage status and residuals, output manifest, config echo.

use crate::config::Scenario;
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageReport {
    pub name: String,
    pub status: String,
    /// Zeroed under the reproducible flag so the report is byte-stable.
    pub wall_s: f64,
    pub outputs: Vec<String>,
    pub residuals: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub config_echo: Scenario,
    pub seed: u64,
    pub reproducible: bool,
    pub stages: Vec<StageReport>,
    pub output_manifest: Vec<String>,
}

/// Expectation record; schema of `expectations.json` entries.
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectationRecord {
    pub observable: String,
    pub value_re: Vec<f64>,
    pub value_im: Vec<f64>,
    pub grid: crate::config::GridBlock,
    pub nu: [u32; 3],
    pub zeta: i8,
    pub order: u8,
    pub hbar: f64,
}

/// Green-kernel report; schema of `green.json`.
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreenReport {
    pub s: f64,
    pub t: f64,
    pub propagation_l2_error: f64,
    pub input_norm: f64,
    /// Captured-norm truncation residuals of the displaced test state,
    /// indexed by nu_max shell.
    pub displaced_truncation_residuals: Vec<f64>,
}
