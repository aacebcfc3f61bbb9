//! Reproducible experiments on the four-dimensional reversible example:
//! resonance values, Melnikov reports, single solves, continuation,
//! monodromy probes and the figure data sets.

use std::collections::BTreeMap;
use std::path::Path;

pub mod commands;
pub mod config;
pub mod figures;
pub mod svg;

pub use config::{Kind, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Solver(#[from] revhom::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Solver(revhom::Error::Usage(_)) | CliError::Solver(revhom::Error::Config(_)) => 2,
            _ => 1,
        }
    }
}

/// What a run produces: text for standard output and named files.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Artifacts {
    pub stdout: String,
    pub files: BTreeMap<String, String>,
}

impl Artifacts {
    pub fn write_to(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir)?;
        for (name, content) in &self.files {
            std::fs::write(dir.join(name), content)?;
        }
        Ok(())
    }
}

/// Header line identifying the run; prefixed with the comment syntax of
/// each file type.
pub fn provenance(config: &RunConfig) -> String {
    format!("revhom {} config={}", config.kind.map(|k| k.name()).unwrap_or("?"), config.to_json_line())
}

pub fn csv_with_header(config: &RunConfig, extra: &[String], body: &str) -> String {
    let mut out = format!("# {}\n", provenance(config));
    for line in extra {
        out.push_str(&format!("# {line}\n"));
    }
    out.push_str(body);
    out
}

pub fn json_with_config(config: &RunConfig, result: serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(&serde_json::json!({ "config": config, "result": result })).expect("json");
    s.push('\n');
    s
}

/// Validates the configuration and runs the experiment it names.
pub fn run(config: &RunConfig) -> Result<Artifacts, CliError> {
    config.validate()?;
    match config.kind.expect("validated") {
        Kind::Resonance => commands::resonance(config),
        Kind::Melnikov => commands::melnikov(config),
        Kind::Solve => commands::solve(config),
        Kind::Continue => commands::continuation(config),
        Kind::Monodromy => commands::monodromy(config),
        Kind::Figures => figures::figures(config),
    }
}
