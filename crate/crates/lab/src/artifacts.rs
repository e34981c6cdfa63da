//! Output directories, artifact writers, and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};

pub const MANIFEST_FORMAT_VERSION: u64 = 1;
pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u64,
    pub tool_version: String,
    pub command: String,
    /// Fully resolved configuration; replaying it reproduces the artifacts.
    pub config: serde_json::Value,
    /// Input files by path, with their checksums at run time.
    pub inputs: BTreeMap<String, String>,
    /// Artifact file names (relative to the manifest) and checksums.
    pub artifacts: BTreeMap<String, String>,
    /// Seconds; excluded from every checksum.
    pub wall_time: f64,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn strip_wall_time(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(map) => {
            map.remove("wall_time");
            map.values_mut().for_each(strip_wall_time);
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(strip_wall_time),
        _ => {}
    }
}

/// SHA-256 of a file. JSON files are hashed after dropping every
/// `wall_time` key, so timing never changes a checksum.
pub fn checksum(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| LabError::io(path, e))?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    let digest = if is_json {
        match serde_json::from_slice::<serde_json::Value>(&bytes) {
            Ok(mut v) => {
                strip_wall_time(&mut v);
                Sha256::digest(serde_json::to_vec(&v).expect("value serializes"))
            }
            Err(_) => Sha256::digest(&bytes),
        }
    } else {
        Sha256::digest(&bytes)
    };
    Ok(hex(&digest))
}

/// Collects the artifacts of one run in a directory.
#[derive(Debug)]
pub struct OutDir {
    dir: PathBuf,
    artifacts: Vec<String>,
    inputs: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| LabError::io(&dir, e))?;
        Ok(Self { dir, artifacts: Vec::new(), inputs: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Registers a file already written under this directory.
    pub fn record(&mut self, name: &str) {
        if !self.artifacts.iter().any(|a| a == name) {
            self.artifacts.push(name.to_string());
        }
    }

    pub fn record_input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.path(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| LabError::Runtime(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| LabError::io(&path, e))?;
        self.record(name);
        Ok(path)
    }

    /// CSV with a header row taken from the field names of `S`.
    pub fn write_csv<S: Serialize>(&mut self, name: &str, rows: &[S], header: &[&str]) -> Result<PathBuf> {
        let path = self.path(name);
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)
            .map_err(|e| LabError::Runtime(format!("{}: {e}", path.display())))?;
        let csv_err = |e: csv::Error| LabError::Runtime(format!("{}: {e}", path.display()));
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.serialize(row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| LabError::io(&path, e))?;
        self.record(name);
        Ok(path)
    }

    /// Writes `manifest.json` covering every recorded artifact.
    pub fn finish(self, command: &str, config: serde_json::Value, wall_time: f64) -> Result<Manifest> {
        let mut artifacts = BTreeMap::new();
        for name in &self.artifacts {
            artifacts.insert(name.clone(), checksum(&self.path(name))?);
        }
        let mut inputs = BTreeMap::new();
        for p in &self.inputs {
            inputs.insert(p.display().to_string(), checksum(p)?);
        }
        let manifest = Manifest {
            format_version: MANIFEST_FORMAT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            inputs,
            artifacts,
            wall_time,
        };
        let path = self.path(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| LabError::io(&path, e))?;
        Ok(manifest)
    }
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| LabError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    if m.format_version != MANIFEST_FORMAT_VERSION {
        return Err(LabError::Version { path: path.to_path_buf(), found: m.format_version, expected: MANIFEST_FORMAT_VERSION });
    }
    Ok(m)
}
