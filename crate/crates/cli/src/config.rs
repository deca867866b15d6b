//! Config resolution, error classification and file helpers.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use vrirl_core::Error as CoreError;

/// Exit status 2 for bad input, 1 for failures after work started.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Precondition(_)
            | CoreError::Dimension { .. }
            | CoreError::InvalidTransitions(_)
            | CoreError::TooLarge { .. }
            | CoreError::Parse(_)
            | CoreError::Json(_)
            | CoreError::Csv(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Defaults, then the `--config` file, then explicit flags.
pub fn resolve<A: Serialize, C: Serialize + DeserializeOwned + Default>(
    flags: &A,
    config_file: Option<&Path>,
) -> CliResult<C> {
    let mut merged = to_object(&C::default())?;
    if let Some(path) = config_file {
        let text = read_text(path)?;
        let file: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        match file {
            Value::Object(m) => {
                if let Some(k) = m.keys().find(|k| !merged.contains_key(*k)) {
                    return Err(CliError::Usage(format!(
                        "{}: unknown config key `{k}`",
                        path.display()
                    )));
                }
                overlay(&mut merged, m)
            }
            _ => {
                return Err(CliError::Usage(format!(
                    "{}: config must be a JSON object",
                    path.display()
                )))
            }
        }
    }
    overlay(&mut merged, to_object(flags)?);
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::Usage(format!("config: {e}")))
}

fn to_object<T: Serialize>(v: &T) -> CliResult<Map<String, Value>> {
    match serde_json::to_value(v).map_err(|e| CliError::Runtime(e.to_string()))? {
        Value::Object(m) => Ok(m),
        _ => Err(CliError::Runtime("config is not an object".into())),
    }
}

fn overlay(base: &mut Map<String, Value>, top: Map<String, Value>) {
    for (k, v) in top {
        if !v.is_null() {
            base.insert(k, v);
        }
    }
}

pub fn required(field: Option<&PathBuf>, flag: &str) -> CliResult<PathBuf> {
    field
        .cloned()
        .ok_or_else(|| CliError::Usage(format!("missing required --{flag}")))
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn open_input(path: &Path) -> CliResult<fs::File> {
    fs::File::open(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Checks that every input exists before any work starts.
pub fn check_inputs(paths: &[&Path]) -> CliResult<()> {
    for p in paths {
        if !p.is_file() {
            return Err(CliError::Usage(format!("{}: no such file", p.display())));
        }
    }
    Ok(())
}

pub fn prepare_out(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))
}

pub fn create_output(dir: &Path, name: &str) -> CliResult<fs::File> {
    let p = dir.join(name);
    fs::File::create(&p).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())))
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> CliResult<()> {
    let p = dir.join(name);
    fs::write(&p, text).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())))
}

/// Writes `config.json` recording the command and its resolved config.
pub fn write_sidecar<C: Serialize>(dir: &Path, command: &str, config: &C) -> CliResult<()> {
    let doc = serde_json::json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
    });
    let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_text(dir, "config.json", &(text + "\n"))
}
