//! Output directory bookkeeping: CSV and JSON writers plus `manifest.json`.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::CliResult;

pub const MANIFEST: &str = "manifest.json";

/// CSV table whose first line records the master seed and code version.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(seed: u64, columns: &[&str]) -> Self {
        let mut text = format!("# seed={seed} version={}\n", rfo_core::VERSION);
        text.push_str(&columns.join(","));
        text.push('\n');
        Self { text }
    }

    pub fn row<I, T>(&mut self, fields: I)
    where
        I: IntoIterator<Item = T>,
        T: Display,
    {
        let cells: Vec<String> = fields.into_iter().map(|f| quote(&f.to_string())).collect();
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

fn quote(cell: &str) -> String {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

/// Empty cell for `None`.
pub fn opt<T: Display>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// Coordinates as `a;b;c`.
pub fn coords<T: Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

#[derive(Debug, Serialize)]
struct FileEntry {
    name: String,
    bytes: u64,
    sha256: String,
}

/// Collects written files and finishes with a manifest.
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<FileEntry>,
    started: u64,
}

impl OutputDir {
    pub fn create(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            started: unix_now(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        std::fs::write(self.dir.join(name), bytes)?;
        self.files.push(FileEntry {
            name: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn csv(&mut self, name: &str, csv: Csv) -> CliResult<()> {
        self.write(name, &csv.into_bytes())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| crate::CliError::Runtime(e.to_string()))?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Writes `manifest.json` and returns the directory.
    pub fn finish(self, command: &str, config: Value, seed: u64, workers: usize) -> CliResult<PathBuf> {
        let manifest = json!({
            "command": command,
            "version": rfo_core::VERSION,
            "seed": seed,
            "workers": workers,
            "config": config,
            "started_unix": self.started,
            "finished_unix": unix_now(),
            "files": self.files,
        });
        let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| crate::CliError::Runtime(e.to_string()))?;
        bytes.push(b'\n');
        std::fs::write(self.dir.join(MANIFEST), bytes)?;
        Ok(self.dir)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// JSON value of a serializable config, for the manifest.
pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}
