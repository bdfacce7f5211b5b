//! Headless `run` command and scenario resolution shared by the subcommands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tandemlift::telemetry::{export_log, rows_from_records};
use tandemlift::{load_scenario, run_scenario, scenarios, RunSummary, ScenarioConfig, SimError};
use thiserror::Error;

use crate::server::ServiceError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(SimError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Output(SimError),
    #[error(transparent)]
    Service(#[from] ServiceError),
}

impl CliError {
    /// 2 for bad input, 3 for I/O and service failures. Aborted runs exit with 1.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Output(_) | CliError::Service(_) => 3,
        }
    }
}

/// Loads a scenario file, or a built-in scenario when `arg` names one and no such file exists.
pub fn resolve_scenario(arg: &str) -> Result<(String, ScenarioConfig), CliError> {
    let path = Path::new(arg);
    if path.exists() {
        let name = path.file_stem().map_or("scenario".into(), |s| s.to_string_lossy().into_owned());
        return load_scenario(path).map(|cfg| (name, cfg)).map_err(CliError::Config);
    }
    match scenarios::by_name(arg) {
        Some(cfg) => Ok((arg.to_string(), cfg)),
        None => Err(CliError::Usage(format!(
            "no scenario file `{arg}` and no built-in scenario of that name (built-ins: {})",
            scenarios::NAMES.join(", ")
        ))),
    }
}

/// Summary file contents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub scenario: String,
    #[serde(flatten)]
    pub summary: RunSummary,
}

#[derive(Debug)]
pub struct RunArtifacts {
    pub csv: PathBuf,
    pub summary_path: PathBuf,
    pub summary: SummaryFile,
}

pub fn run(scenario: &str, dt: Option<f64>, out: &Path) -> Result<RunArtifacts, CliError> {
    let (name, mut cfg) = resolve_scenario(scenario)?;
    if let Some(dt) = dt {
        cfg.dt = dt;
        cfg.validate().map_err(|e| match e {
            SimError::InvalidParameter { name, reason } => CliError::Usage(format!("--dt: {name} {reason}")),
            other => CliError::Config(other),
        })?;
    }
    let run = run_scenario(&cfg).map_err(CliError::Config)?;

    std::fs::create_dir_all(out).map_err(|source| {
        CliError::Output(SimError::Io {
            path: out.to_path_buf(),
            source,
        })
    })?;
    let csv = out.join(format!("{name}.csv"));
    export_log(&rows_from_records(&run.records), &csv).map_err(CliError::Output)?;
    let summary = SummaryFile {
        scenario: name.clone(),
        summary: run.summary,
    };
    let summary_path = out.join(format!("{name}.summary.json"));
    let text = serde_json::to_string_pretty(&summary).expect("summary is plain data");
    std::fs::write(&summary_path, text + "\n").map_err(|source| {
        CliError::Output(SimError::Io {
            path: summary_path.clone(),
            source,
        })
    })?;
    Ok(RunArtifacts {
        csv,
        summary_path,
        summary,
    })
}
