use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub started_at: String,
    pub finished_at: String,
    pub config: serde_json::Value,
    pub artifacts: Vec<String>,
}

/// Output directory that remembers every file written through it.
pub struct ArtifactDir {
    root: PathBuf,
    written: Vec<String>,
    started_at: String,
}

impl ArtifactDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::io(format!("creating {}", root.display()), e))?;
        Ok(ArtifactDir {
            root: root.to_path_buf(),
            written: Vec::new(),
            started_at: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
        })
    }

    /// Writes one artifact through `fill` and records it.
    pub fn write<F>(&mut self, name: &str, fill: F) -> CliResult<PathBuf>
    where
        F: FnOnce(&mut dyn Write) -> CliResult<()>,
    {
        let path = self.root.join(name);
        let file = fs::File::create(&path).map_err(|e| CliError::io(format!("creating {}", path.display()), e))?;
        let mut out = BufWriter::new(file);
        fill(&mut out)?;
        out.flush().map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        Ok(path)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> CliResult<PathBuf> {
        self.write(name, |out| out.write_all(text.as_bytes()).map_err(|e| CliError::io(name, e)))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).expect("summary serializes");
        text.push('\n');
        self.write_text(name, &text)
    }

    /// Writes the manifest; it must be the last file of the run.
    pub fn finish<C: Serialize>(self, command: &str, seed: u64, config: &C) -> CliResult<PathBuf> {
        let config = serde_json::to_value(config).expect("config serializes");
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_sha256: config_hash(command, seed, &config),
            seed,
            started_at: self.started_at,
            finished_at: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            config,
            artifacts: self.written,
        };
        let path = self.root.join(MANIFEST_NAME);
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
        Ok(path)
    }
}

/// SHA-256 of the effective settings, so flag overrides count.
pub fn config_hash(command: &str, seed: u64, config: &serde_json::Value) -> String {
    let canonical = serde_json::json!({ "command": command, "seed": seed, "config": config });
    hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
}
