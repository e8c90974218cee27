//! Run manifests: every command writes one next to its outputs, recording
//! the resolved parameters so the run can be reproduced exactly with
//! `--from-manifest`.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest<P> {
    pub tool_version: String,
    pub command: String,
    pub master_seed: u64,
    pub parameters: P,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<String>,
}

impl<P: Serialize + DeserializeOwned> RunManifest<P> {
    pub fn new(
        command: &str,
        master_seed: u64,
        parameters: P,
        inputs: Vec<PathBuf>,
        outputs: Vec<String>,
    ) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            command: command.to_string(),
            master_seed,
            parameters,
            inputs,
            outputs,
        }
    }

    pub fn write_dir(&self, dir: &Path) -> anyhow::Result<PathBuf> {
        self.write_to(&dir.join("run_manifest.json"))
    }

    pub fn write_to(&self, path: &Path) -> anyhow::Result<PathBuf> {
        let text = serde_json::to_string_pretty(self).context("serializing run manifest")?;
        std::fs::write(path, text + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path.to_path_buf())
    }

    pub fn load(path: &Path, expected_command: &str) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading run manifest {}", path.display()))?;
        let manifest: Self =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        anyhow::ensure!(
            manifest.command == expected_command,
            "run manifest {} was written by `{}`, not `{expected_command}`",
            path.display(),
            manifest.command
        );
        Ok(manifest)
    }
}
