use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use treerpo::trainer::TrainConfig;

pub const FILE_NAME: &str = "manifest.json";

/// Everything needed to rerun a training run. Artifact paths are relative to
/// the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub seed: u64,
    pub started_at: String,
    pub finished_at: String,
    pub config: TrainConfig,
    pub artifacts: Artifacts,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub config: PathBuf,
    pub eval_tasks: PathBuf,
    pub metrics: PathBuf,
    pub final_checkpoint: PathBuf,
    #[serde(default)]
    pub checkpoints: Vec<PathBuf>,
}

impl RunManifest {
    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let m: RunManifest =
            serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))?;
        m.config.validate()?;
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}

pub fn version() -> String {
    format!("treerpo-cli {}", env!("CARGO_PKG_VERSION"))
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}
