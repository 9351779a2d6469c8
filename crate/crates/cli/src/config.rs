//! Config files, flag overrides and error reporting.

use std::fs;
use std::path::Path;

use gilbertlab_core::Error;
use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(Error),
    Io { path: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 3,
            CliError::Io { .. } => 5,
            CliError::Core(e) => match e {
                Error::InvalidParameter(_) => 3,
                Error::FixtureTooLarge { .. } => 4,
                Error::Io(_) | Error::Csv(_) => 5,
                Error::WidenGrid(_) => 6,
                Error::InvariantFailure(_) => 7,
            },
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "invalid_config",
            CliError::Io { .. } => "io",
            CliError::Core(e) => match e {
                Error::InvalidParameter(_) => "invalid_parameter",
                Error::FixtureTooLarge { .. } => "fixture_too_large",
                Error::Io(_) | Error::Csv(_) => "io",
                Error::WidenGrid(_) => "widen_grid",
                Error::InvariantFailure(_) => "invariant_failure",
            },
        }
    }

    pub fn to_json(&self) -> String {
        let mut obj = Map::new();
        obj.insert("error".into(), self.kind().into());
        let message = match self {
            CliError::Config(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
            CliError::Io { path, message } => {
                obj.insert("path".into(), path.clone().into());
                format!("{path}: {message}")
            }
        };
        obj.insert("message".into(), message.into());
        Value::Object(obj).to_string()
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

/// Reads a config object. A manifest is accepted too, in which case its
/// `config` entry is used after checking the subcommand.
pub fn load(path: Option<&Path>, subcommand: &str) -> Result<Map<String, Value>, CliError> {
    let Some(path) = path else {
        return Ok(Map::new());
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let Value::Object(mut obj) = value else {
        return Err(CliError::Config(format!("{}: config must be a JSON object", path.display())));
    };
    if let (Some(Value::String(sub)), Some(Value::Object(_))) = (obj.get("subcommand"), obj.get("config")) {
        if sub != subcommand {
            return Err(CliError::Config(format!(
                "{}: manifest is for `{sub}`, not `{subcommand}`",
                path.display()
            )));
        }
        let Some(Value::Object(inner)) = obj.remove("config") else { unreachable!() };
        return Ok(inner);
    }
    Ok(obj)
}

/// Applies flag values (only those given) over the file values.
pub struct Layer {
    map: Map<String, Value>,
}

impl Layer {
    pub fn new(map: Map<String, Value>) -> Self {
        Self { map }
    }

    pub fn set<T: serde::Serialize>(&mut self, key: &str, value: Option<T>) -> &mut Self {
        if let Some(v) = value {
            self.map.insert(key.into(), serde_json::to_value(v).expect("flag values serialize"));
        }
        self
    }

    pub fn flag(&mut self, key: &str, on: bool) -> &mut Self {
        if on {
            self.map.insert(key.into(), Value::Bool(true));
        }
        self
    }

    pub fn resolve<T: DeserializeOwned>(&self) -> Result<T, CliError> {
        serde_json::from_value(Value::Object(self.map.clone())).map_err(|e| CliError::Config(e.to_string()))
    }
}
