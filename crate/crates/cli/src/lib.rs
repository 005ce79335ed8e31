//! Command-line front end: configuration files, run orchestration and the
//! CSV/JSON writers behind the `lqsolve` binary.

pub mod config;
pub mod run;

use std::path::{Path, PathBuf};

pub use config::{parse_config, render, Config, ConfigError, Grid};
pub use run::{execute, Artifacts, Command, Report, RunSpec, Status};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Config { path: String, source: ConfigError },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Argument(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Argument(_) => Status::InputError.exit_code(),
            CliError::Io { .. } => Status::InputError.exit_code(),
        }
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub grid: Option<Grid>,
}

pub fn load_spec(command: Command, path: &Path, ov: &Overrides) -> Result<RunSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut config = parse_config(&text).map_err(|source| CliError::Config {
        path: path.display().to_string(),
        source,
    })?;
    if let Some(seed) = ov.seed {
        config.engine.seed = Some(seed);
    }
    if let Some(n) = ov.samples {
        if n == 0 {
            return Err(CliError::Argument("--samples must be positive".into()));
        }
        config.engine.samples = Some(n);
    }
    if let Some(g) = &ov.grid {
        config.output.grid = Some(g.clone());
    }
    if let Some(dir) = &ov.out {
        config.output.dir = Some(dir.display().to_string());
    }
    Ok(RunSpec { command, config })
}

pub fn report_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// Writes `<command>.json` and every artifact into the output directory,
/// if one is configured. Returns the paths written.
pub fn write_outputs(
    spec: &RunSpec,
    report: &Report,
    artifacts: &Artifacts,
) -> Result<Vec<PathBuf>, CliError> {
    let Some(dir) = spec.config.output.dir.as_deref() else {
        return Ok(Vec::new());
    };
    let dir = PathBuf::from(dir);
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| CliError::Io { path, source }
    };
    std::fs::create_dir_all(&dir).map_err(io(&dir))?;
    let mut written = Vec::new();
    let json = dir.join(format!("{}.json", spec.command.name()));
    std::fs::write(&json, report_json(report)).map_err(io(&json))?;
    written.push(json);
    for (name, body) in &artifacts.files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}
