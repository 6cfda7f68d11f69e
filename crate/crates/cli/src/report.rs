use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::CliError;

/// A finished experiment: CSV rows plus a JSON summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Extra per-point detail for the summary.
    pub details: Value,
    kind: &'static str,
    seed: u64,
    trials: usize,
}

impl Report {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            details: Value::Null,
            kind: "",
            seed: 0,
            trials: 0,
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub(crate) fn set_meta(&mut self, kind: &'static str, seed: u64, trials: usize) {
        self.kind = kind;
        self.seed = seed;
        self.trials = trials;
    }

    /// Header plus rows, comma separated, LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                Value::Object(
                    self.header
                        .iter()
                        .cloned()
                        .zip(r.iter().map(|v| Value::String(v.clone())))
                        .collect(),
                )
            })
            .collect();
        let summary = json!({
            "experiment": self.kind,
            "seed": self.seed,
            "trials": self.trials,
            "columns": self.header,
            "rows": rows,
            "details": self.details,
        });
        let mut s = serde_json::to_string_pretty(&summary).expect("summary serializes");
        s.push('\n');
        s
    }
}

/// Where the JSON summary goes for a CSV written to `out`.
pub fn summary_path(out: &Path) -> PathBuf {
    if out.extension().is_some_and(|e| e == "json") {
        out.with_extension("summary.json")
    } else {
        out.with_extension("json")
    }
}

/// Writes `contents` next to `path` first and renames it into place, so a
/// failed run never leaves a partial file behind.
fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let err = |e: std::io::Error| CliError::Runtime(format!("cannot write {}: {e}", path.display()));
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    let mut f = std::fs::File::create(&tmp).map_err(err)?;
    f.write_all(contents.as_bytes()).map_err(err)?;
    f.sync_all().map_err(err)?;
    std::fs::rename(&tmp, path).map_err(err)
}

/// Writes the CSV to `out` and the summary beside it.
pub fn write_files(report: &Report, out: &Path) -> Result<(), CliError> {
    let csv = report.to_csv();
    let json = report.to_json();
    write_atomic(out, &csv)?;
    write_atomic(&summary_path(out), &json)
}
