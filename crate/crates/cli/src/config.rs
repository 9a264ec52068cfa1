//! Optional TOML config file. Command-line flags take precedence.
//!
//! ```toml
//! threads = 4
//!
//! [simulate]
//! fps = 30.0
//! theta_pos = 0.2
//!
//! [ecm]
//! window_us = 33333
//! mode = "signed"
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::error::{invalid, CliError, CliResult};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub threads: Option<usize>,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub ecm: EcmSection,
    #[serde(default)]
    pub reconstruct: ReconstructSection,
    #[serde(default)]
    pub eval: EvalSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub fps: Option<f64>,
    pub theta_pos: Option<f64>,
    pub theta_neg: Option<f64>,
    pub knee: Option<f64>,
    pub max_events: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EcmSection {
    pub window_us: Option<u64>,
    pub fps: Option<f64>,
    pub mode: Option<String>,
    pub norm: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructSection {
    pub alpha: Option<f64>,
    pub contrast: Option<f64>,
    pub sample_period_us: Option<u64>,
    pub tone_map: Option<String>,
    pub tone_lo: Option<f64>,
    pub tone_hi: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub fps: Option<f64>,
    pub window_us: Option<u64>,
    pub width: Option<u32>,
    pub height: Option<u32>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| invalid(format!("config {}: {e}", path.display())))
    }
}
