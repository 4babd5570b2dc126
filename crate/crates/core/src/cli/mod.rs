//! Command-line front end. Every command reads optional settings from a
//! TOML file (`--config`), lets flags override them, and records a run
//! manifest in its output directory.

mod args;
mod commands;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use serde::de::DeserializeOwned;
use serde::Serialize;
use ssvep_cstl::artifacts::{write_run_manifest, RunManifest};

pub use args::Cli;

/// Usage problems exit with 2, runtime failures with 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(ssvep_cstl::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Run(_) => 1,
        }
    }

    /// `<kind>: <message>` on one line.
    pub fn one_line(&self) -> String {
        let (kind, msg) = match self {
            CliError::Usage(m) => ("usage", m.clone()),
            CliError::Run(e) => (e.kind(), e.to_string()),
        };
        format!(
            "{kind}: {}",
            msg.split_whitespace().collect::<Vec<_>>().join(" ")
        )
    }
}

impl From<ssvep_cstl::Error> for CliError {
    fn from(e: ssvep_cstl::Error) -> Self {
        CliError::Run(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> CliResult<ExitCode> {
    commands::dispatch(cli.command)
}

/// Settings from `path`, or defaults. Unknown keys are usage errors naming
/// the key.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config {}: {}", path.display(), e.message())))
}

pub fn require<T>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::Usage(format!("missing required {flag}")))
}

pub fn record_run(
    out: &Path,
    command: &str,
    seed: Option<u64>,
    config: &impl Serialize,
    inputs: &[PathBuf],
) -> CliResult<PathBuf> {
    let manifest = RunManifest::new(command, seed, config, inputs)?;
    Ok(write_run_manifest(out, &manifest)?)
}
