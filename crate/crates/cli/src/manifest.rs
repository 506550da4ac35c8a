//! `manifest.toml`, written next to every artifact set.

use std::path::Path;

use serde::Serialize;

#[derive(Serialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub config_digest: String,
    pub seed: Option<u64>,
    pub artifacts: Vec<String>,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(config_digest: String, seed: Option<u64>) -> Self {
        RunManifest {
            command: std::env::args().collect(),
            config_digest,
            seed,
            artifacts: Vec::new(),
            tool_version: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
        }
    }

    /// Write `contents` to `dir/name` and list it.
    pub fn artifact(&mut self, dir: &Path, name: &str, contents: &str) -> std::io::Result<()> {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, contents)?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::write(dir.join("manifest.toml"), toml::to_string(self).expect("manifest serializes"))
    }
}
