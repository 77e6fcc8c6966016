use std::fs;
use std::path::{Path, PathBuf};

use psyc_core::RunConfig;
use serde::{de::DeserializeOwned, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_FORMAT: &str = "psyc-manifest";

#[derive(Debug, Serialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

/// Written next to every artifact as `<out>.manifest.json`.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub format: &'static str,
    pub version: u32,
    pub tool_version: &'static str,
    pub command: String,
    /// Command-specific arguments beyond the config.
    pub args: serde_json::Value,
    /// Effective configuration after file and flag overrides.
    pub config: RunConfig,
    pub inputs: Vec<InputRecord>,
    /// Files written, relative to the output path's parent.
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, args: serde_json::Value, config: &RunConfig) -> Manifest {
        Manifest {
            format: MANIFEST_FORMAT,
            version: 1,
            tool_version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            args,
            config: config.clone(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        self.inputs.push(InputRecord {
            path: path.display().to_string(),
            sha256: hash_path(path)?,
        });
        Ok(())
    }

    pub fn write(mut self, out: &Path, outputs: &[&Path]) -> Result<PathBuf, CliError> {
        let base = out.parent().unwrap_or(Path::new(""));
        self.outputs = outputs
            .iter()
            .map(|p| p.strip_prefix(base).unwrap_or(p).display().to_string())
            .collect();
        let path = sibling(out, "manifest.json");
        write_json(&path, &self)?;
        Ok(path)
    }
}

/// `<path>.<suffix>`, keeping the original extension.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

/// Digest of a file, or of every file under a directory in path order.
fn hash_path(path: &Path) -> Result<String, CliError> {
    let mut hasher = Sha256::new();
    let mut files = Vec::new();
    collect_files(path, &mut files)?;
    files.sort();
    for f in files {
        if path.is_dir() {
            hasher.update(f.strip_prefix(path).unwrap_or(&f).to_string_lossy().as_bytes());
        }
        hasher.update(fs::read(&f).map_err(|e| CliError::io(&f, e))?);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

fn collect_files(path: &Path, out: &mut Vec<PathBuf>) -> Result<(), CliError> {
    if path.is_dir() {
        for entry in fs::read_dir(path).map_err(|e| CliError::io(path, e))? {
            collect_files(&entry.map_err(|e| CliError::io(path, e))?.path(), out)?;
        }
    } else {
        out.push(path.to_path_buf());
    }
    Ok(())
}

/// Exclusive claim on an output path, released on drop.
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(out: &Path) -> Result<OutputLock, CliError> {
        if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        let path = sibling(out, "lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(OutputLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Locked(format!(
                "{} exists; another process is writing {} (remove the lock file if that process is gone)",
                path.display(),
                out.display()
            ))),
            Err(e) => Err(CliError::io(&path, e)),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

pub fn require(path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::PathMissing(format!("no such file or directory: {}", path.display())))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut json = serde_json::to_string_pretty(value).map_err(|e| CliError::Format(e.to_string()))?;
    json.push('\n');
    fs::write(path, json).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    require(path)?;
    let raw = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&raw).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}
