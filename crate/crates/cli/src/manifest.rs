use serde::{Deserialize, Serialize};

use crate::Command;

/// Record written next to every command's artifacts. `parameters` holds the
/// parsed command, so `relu-lab replay` can rerun it exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub parameters: Command,
    pub seed: Option<u64>,
    pub execution: relu_lab::Execution,
    pub artifacts: Vec<String>,
    pub duration_secs: f64,
}

pub const MANIFEST_FILE: &str = "manifest.json";
