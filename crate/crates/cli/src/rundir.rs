//! Run directories: `logs/<backend>__<language>.jsonl`, a `.lock` held by
//! the single writer, and `manifest.json`, written last as the completion
//! marker.

use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use compass_core::backends::GenerationParams;
use compass_core::harness::{read_log, LogHeader, ResponseRecord};
use compass_core::util::sha256_hex;

use crate::error::{read, read_json, write_json, CliError, Result};

pub const MANIFEST_FORMAT: &str = "compass-run/1";
pub const MANIFEST: &str = "manifest.json";
pub const LOCK: &str = ".lock";
pub const LOG_DIR: &str = "logs";

/// Timestamp written under `--reproducible`.
pub const EPOCH: &str = "1970-01-01T00:00:00.000Z";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub format: String,
    pub run_id: String,
    pub experiment: String,
    pub tool_version: String,
    pub config_sha256: String,
    pub questionnaire_sha256: String,
    pub generation_params_id: String,
    pub generation_params: GenerationParams,
    pub languages: Vec<String>,
    pub paraphrase_ids: Vec<usize>,
    pub backends: Vec<BackendEntry>,
    pub started: String,
    pub finished: String,
    pub files: Vec<LogEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendEntry {
    pub id: String,
    pub kind: String,
    pub seed_sent: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogEntry {
    /// Relative to the run directory, `/`-separated.
    pub path: String,
    pub backend_id: String,
    pub language: String,
    pub records: usize,
    pub sha256: String,
}

pub fn log_name(backend: &str, language: &str) -> String {
    format!("{LOG_DIR}/{backend}__{language}.jsonl")
}

/// Exclusive writer lock; released on drop.
#[derive(Debug)]
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(LOCK);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(DirLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Locked(dir.to_path_buf())),
            Err(e) => Err(CliError::io(&path)(e)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

/// Creates `dir` if needed; it must not contain anything yet.
pub fn prepare_empty(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let mut entries = std::fs::read_dir(dir).map_err(CliError::io(dir))?;
    if entries.next().is_some() {
        return Err(CliError::OutputExists(dir.to_path_buf()));
    }
    Ok(())
}

/// Writes `manifest.json` through a rename so a partial file never appears.
pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    let tmp = dir.join(".manifest.json.tmp");
    write_json(&tmp, manifest)?;
    let dest = dir.join(MANIFEST);
    std::fs::rename(&tmp, &dest).map_err(CliError::io(&dest))
}

/// A complete run whose logs matched their manifest hashes.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub logs: Vec<(LogHeader, Vec<ResponseRecord>)>,
}

impl LoadedRun {
    pub fn records(&self) -> impl Iterator<Item = &ResponseRecord> {
        self.logs.iter().flat_map(|(_, r)| r)
    }
}

pub fn load_run(dir: &Path) -> Result<LoadedRun> {
    let manifest_path = dir.join(MANIFEST);
    if !manifest_path.is_file() {
        let hint = if dir.join(LOCK).exists() {
            " (a writer is active or was interrupted)"
        } else if !dir.exists() {
            " (directory does not exist)"
        } else {
            ""
        };
        return Err(CliError::IncompleteRun { dir: dir.to_path_buf(), hint });
    }
    let manifest: RunManifest = read_json(&manifest_path)?;
    if manifest.format != MANIFEST_FORMAT {
        return Err(CliError::Mismatch(format!(
            "{}: unsupported manifest format `{}`",
            manifest_path.display(),
            manifest.format
        )));
    }
    let mut logs = Vec::with_capacity(manifest.files.len());
    for entry in &manifest.files {
        let rel = Path::new(&entry.path);
        if rel.is_absolute() || rel.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
            return Err(CliError::Tampered { file: rel.to_path_buf(), reason: "path escapes the run directory".into() });
        }
        let path = dir.join(rel);
        if !path.is_file() {
            return Err(CliError::Tampered { file: path, reason: "file is missing".into() });
        }
        let digest = sha256_hex(&read(&path)?);
        if digest != entry.sha256 {
            return Err(CliError::Tampered {
                file: path,
                reason: format!("sha256 {digest} differs from recorded {}", entry.sha256),
            });
        }
        let (header, records) = read_log(&path)?;
        if header.run_id != manifest.run_id || header.backend_id != entry.backend_id || header.language != entry.language
        {
            return Err(CliError::Tampered { file: path, reason: "header disagrees with the manifest".into() });
        }
        if records.len() != entry.records {
            return Err(CliError::Tampered {
                file: path,
                reason: format!("{} records, manifest lists {}", records.len(), entry.records),
            });
        }
        logs.push((header, records));
    }
    Ok(LoadedRun { dir: dir.to_path_buf(), manifest, logs })
}
