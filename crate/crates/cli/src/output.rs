//! Output files, the run summary and the manifest that lists them.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// One scalar result of a run.
#[derive(Debug, Clone)]
pub struct SummaryItem {
    pub key: String,
    pub value: f64,
    pub unit: String,
}

#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    prefix: String,
    files: Vec<(String, String, usize)>,
    summary: Vec<SummaryItem>,
    notes: Vec<String>,
    report: Option<String>,
}

impl Outputs {
    pub fn new(dir: &Path, prefix: &str) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            prefix: prefix.to_string(),
            files: Vec::new(),
            summary: Vec::new(),
            notes: Vec::new(),
            report: None,
        })
    }

    /// Render a CSV into memory with `render` and write it as
    /// `<prefix>_<name>.csv`.
    pub fn csv<F>(&mut self, name: &str, render: F) -> Result<PathBuf, CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<(), CliError>,
    {
        let mut bytes = Vec::new();
        render(&mut bytes)?;
        let file = format!("{}_{name}.csv", self.prefix);
        let path = self.dir.join(&file);
        std::fs::write(&path, &bytes).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
        let rows = bytes.iter().filter(|&&b| b == b'\n').count().saturating_sub(2);
        self.files.push((file, sha256_hex(&bytes), rows));
        Ok(path)
    }

    /// Write a plain-text report as `<prefix>_<name>.txt`; it is also what
    /// the command prints.
    pub fn text(&mut self, name: &str, content: String) -> Result<PathBuf, CliError> {
        let file = format!("{}_{name}.txt", self.prefix);
        let path = self.dir.join(&file);
        std::fs::write(&path, &content).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
        self.files.push((file, sha256_hex(content.as_bytes()), content.lines().count()));
        self.report = Some(content);
        Ok(path)
    }

    pub fn report(&self) -> Option<&str> {
        self.report.as_deref()
    }

    pub fn summary(&mut self, key: &str, value: f64, unit: &str) {
        self.summary.push(SummaryItem {
            key: key.into(),
            value,
            unit: unit.into(),
        });
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn summary_items(&self) -> &[SummaryItem] {
        &self.summary
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    /// Write `<prefix>_manifest.json`. No timestamps or absolute paths, so
    /// identical inputs give identical manifests.
    pub fn finish(&mut self, experiment: &str, input_sha256: &str, seed: Option<u64>) -> Result<PathBuf, CliError> {
        let outputs: Vec<Value> = self
            .files
            .iter()
            .map(|(file, sha, rows)| json!({ "file": file, "sha256": sha, "rows": rows }))
            .collect();
        let mut summary = Map::new();
        for item in &self.summary {
            summary.insert(item.key.clone(), json!({ "value": item.value, "unit": item.unit }));
        }
        let manifest = json!({
            "experiment": experiment,
            "name": self.prefix,
            "input_sha256": input_sha256,
            "seed": seed,
            "outputs": outputs,
            "summary": summary,
            "notes": self.notes,
        });
        let file = format!("{}_manifest.json", self.prefix);
        let path = self.dir.join(&file);
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Output(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

/// Formatter used for every floating-point CSV cell.
pub fn num(v: f64) -> String {
    format!("{v:.12e}")
}
