//! Run manifest: every artifact with its content hash and producing stage,
//! plus the pass/fail checks that decide the exit status.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub sha256: String,
    pub stage: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckEntry {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryItem {
    pub name: String,
    pub value: serde_json::Value,
    /// Artifact file the number came from.
    pub source: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct Manifest {
    pub scenario: String,
    pub seed: u64,
    pub artifacts: Vec<ArtifactEntry>,
    pub checks: Vec<CheckEntry>,
    pub summary: Vec<SummaryItem>,
}

impl Manifest {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| CliError::Config {
            path: path.display().to_string(),
            detail: format!("manifest parse error: {e}"),
        })
    }
}

/// Writes `bytes` under `dir/name`, records it in the manifest.
pub struct ArtifactWriter {
    dir: PathBuf,
    pub entries: Vec<ArtifactEntry>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        Ok(ArtifactWriter {
            dir: dir.to_path_buf(),
            entries: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, stage: &str, bytes: &[u8]) -> Result<(), CliError> {
        let mut hasher = Sha256::new();
        hasher.update(bytes);
        let digest = hasher.finalize();
        let sha256 = digest.iter().map(|b| format!("{b:02x}")).collect::<String>();
        let path = self.dir.join(name);
        let mut file = std::fs::File::create(&path)?;
        file.write_all(bytes)?;
        self.entries.push(ArtifactEntry {
            file: name.to_string(),
            sha256,
            stage: stage.to_string(),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(
        &mut self,
        name: &str,
        stage: &str,
        value: &T,
    ) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Config {
            path: name.to_string(),
            detail: e.to_string(),
        })?;
        bytes.push(b'\n');
        self.write(name, stage, &bytes)
    }
}

/// Renders the human-readable summary of a manifest. Every number in it
/// traces back to an artifact file listed in the manifest.
pub fn render_summary(manifest: &Manifest) -> String {
    let mut out = String::new();
    if manifest.artifacts.is_empty() && manifest.summary.is_empty() && manifest.checks.is_empty() {
        return out;
    }
    out.push_str(&format!(
        "scenario {} (seed {})\n",
        manifest.scenario, manifest.seed
    ));
    for item in &manifest.summary {
        out.push_str(&format!(
            "  {} = {}  [{}]\n",
            item.name, item.value, item.source
        ));
    }
    for check in &manifest.checks {
        out.push_str(&format!(
            "  check {}: {} — {}\n",
            check.name,
            if check.passed { "pass" } else { "FAIL" },
            check.detail
        ));
    }
    out.push_str(&format!(
        "result: {}\n",
        if manifest.passed() { "PASS" } else { "FAIL" }
    ));
    out
}
