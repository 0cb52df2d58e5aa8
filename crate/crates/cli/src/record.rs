use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliResult;

/// JSON sidecar written next to every CSV output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub command: String,
    pub version: String,
    /// Fully resolved configuration; passing this file back as `--config`
    /// replays the run.
    pub config: RunConfig,
    pub outputs: serde_json::Value,
    pub data_file: Option<PathBuf>,
    pub duration_s: f64,
    /// Set when the command wrote partial results and then failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ResultRecord {
    pub fn new(command: &str, config: RunConfig, outputs: serde_json::Value, duration_s: f64) -> Self {
        ResultRecord {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            data_file: config.output.clone(),
            config,
            outputs,
            duration_s,
            error: None,
        }
    }

    pub fn to_json(&self) -> CliResult<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `trace.csv` → `trace.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}
