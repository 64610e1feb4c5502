use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use crate::plan::Plan;

/// Everything needed to rerun a command: the resolved plan, its seed and
/// the files it wrote (relative to the output directory).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    #[serde(flatten)]
    pub plan: Plan,
    pub seed: Option<u64>,
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub fn new(plan: Plan, artifacts: Vec<String>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: plan.seed(),
            plan,
            artifacts,
        }
    }

    pub fn file_name(&self) -> String {
        format!("{}.manifest.json", self.plan.name())
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<String> {
        let name = self.file_name();
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(dir.join(&name), text)?;
        Ok(name)
    }
}
