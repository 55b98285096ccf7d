//! `manifest.json`: what ran, how each stage ended, and a checksum for every
//! other file in the output directory.

use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ok,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub status: StageStatus,
    pub seconds: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact: String,
    pub version: String,
    pub subcommand: String,
    /// SHA-256 of the config file as read.
    pub config_sha256: Option<String>,
    /// The configuration after defaults were applied.
    pub config: Option<serde_json::Value>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub exit_code: u8,
    pub stages: Vec<Stage>,
    pub files: Vec<FileEntry>,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects stages while a subcommand runs.
pub struct Recorder {
    pub subcommand: String,
    pub config_sha256: Option<String>,
    pub config: Option<serde_json::Value>,
    pub stages: Vec<Stage>,
    started: f64,
}

impl Recorder {
    pub fn new(subcommand: &str) -> Self {
        Recorder {
            subcommand: subcommand.to_string(),
            config_sha256: None,
            config: None,
            stages: Vec::new(),
            started: unix_now(),
        }
    }

    /// Runs `f` as a named stage and records how it ended.
    pub fn stage<T, E: std::fmt::Display>(
        &mut self,
        name: &str,
        f: impl FnOnce() -> Result<T, E>,
    ) -> Result<T, E> {
        let clock = Instant::now();
        let out = f();
        let (status, message) = match &out {
            Ok(_) => (StageStatus::Ok, String::new()),
            Err(e) => (StageStatus::Failed, e.to_string()),
        };
        self.stages.push(Stage {
            name: name.to_string(),
            status,
            seconds: clock.elapsed().as_secs_f64(),
            message,
        });
        out
    }

    /// Attaches a note to the most recent stage.
    pub fn note(&mut self, message: impl Into<String>) {
        if let Some(s) = self.stages.last_mut() {
            if !s.message.is_empty() {
                s.message.push_str("; ");
            }
            s.message.push_str(&message.into());
        }
    }

    /// Inventories `dir` and writes the manifest into it.
    pub fn finish(self, dir: &Path, exit_code: u8) -> std::io::Result<RunManifest> {
        std::fs::create_dir_all(dir)?;
        let manifest = RunManifest {
            artifact: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: self.subcommand,
            config_sha256: self.config_sha256,
            config: self.config,
            started_unix: self.started,
            finished_unix: unix_now(),
            exit_code,
            stages: self.stages,
            files: inventory(dir)?,
        };
        let json = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
        std::fs::write(dir.join(MANIFEST_NAME), json)?;
        Ok(manifest)
    }
}

/// Every regular file under `dir` except the manifest, sorted by path.
pub fn inventory(dir: &Path) -> std::io::Result<Vec<FileEntry>> {
    let mut files = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(std::io::Error::other)?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(dir)
            .map_err(std::io::Error::other)?;
        let path = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        if path == MANIFEST_NAME {
            continue;
        }
        let bytes = std::fs::read(entry.path())?;
        files.push(FileEntry {
            path,
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
    }
    Ok(files)
}
