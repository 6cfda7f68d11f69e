//! Library side of the `cimsim` command: config parsing, experiment
//! execution and report output. The binary is a thin clap wrapper.

use std::path::Path;

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{Format, Overrides};
pub use report::Report;

/// Failures surfaced by the command, split by exit code.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CliError {
    /// Bad input: unreadable or invalid config, model or dataset.
    #[error("{0}")]
    Config(String),
    /// The experiment itself failed.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Runtime(_) => "runtime",
        }
    }

    /// `{"error": {"kind": ..., "message": ...}}`, for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": { "kind": self.kind(), "message": self.to_string() } }).to_string()
    }
}

/// What a finished run hands back to the caller.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub format: Format,
    /// Set when files were written.
    pub out: Option<std::path::PathBuf>,
}

impl Outcome {
    /// The text for stdout in the selected format.
    pub fn stdout(&self) -> String {
        match self.format {
            Format::Csv => self.report.to_csv(),
            Format::Json => self.report.to_json(),
        }
    }
}

/// Loads, validates and runs one experiment. Output files, if any, are
/// written only after every point has been computed.
pub fn run(kind: &str, config_path: &Path, overrides: Overrides) -> Result<Outcome, CliError> {
    let cfg = config::load(config_path)?;
    let base = config_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let resolved = config::resolve(cfg, kind, overrides, base)?;
    let report = experiments::execute(&resolved)?;
    if let Some(out) = &resolved.out {
        report::write_files(&report, out)?;
    }
    Ok(Outcome {
        report,
        format: resolved.format,
        out: resolved.out,
    })
}
