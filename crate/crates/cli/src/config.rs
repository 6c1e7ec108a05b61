use std::fmt;
use std::path::Path;

use lipselect::Error;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    /// Malformed or incomplete input, with its location.
    Schema(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Schema(msg) => write!(f, "schema error: {msg}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        let core = match self {
            CliError::Schema(_) => return 2,
            CliError::Core(e) => e.root(),
        };
        match core {
            Error::Json(_)
            | Error::Io(_)
            | Error::Config(_)
            | Error::Shape { .. }
            | Error::UnknownPoint(_) => 2,
            Error::Parameter { .. }
            | Error::Precondition(_)
            | Error::Range(_)
            | Error::RankDeficient { .. }
            | Error::Rate { .. } => 3,
            Error::Convergence { .. }
            | Error::DegenerateRadius { .. }
            | Error::InvariantViolation(_)
            | Error::Resolution(_)
            | Error::Anchor { .. } => 4,
        }
    }

    /// Name of the offending numeric parameter, when there is one.
    pub fn parameter(&self) -> Option<&'static str> {
        match self {
            CliError::Core(e) => match e.root() {
                Error::Parameter { name, .. } => Some(name),
                Error::Rate { .. } => Some("alpha"),
                Error::RankDeficient { .. } => Some("matrix"),
                Error::Range(_) => Some("x"),
                _ => None,
            },
            CliError::Schema(_) => None,
        }
    }
}

/// Reads `path` with the file name attached to any error.
pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
}

/// Parses JSON with the file name and line/column attached to any error.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
}

pub fn load(path: Option<&Path>) -> Result<Option<Map<String, Value>>, CliError> {
    path.map(read_json::<Map<String, Value>>).transpose()
}

/// Fills flags left unset on the command line from the config object.
/// Keys use the flag names with `-` replaced by `_`.
pub fn merge<T: Serialize + DeserializeOwned>(
    args: T,
    cfg: &Option<Map<String, Value>>,
) -> Result<T, CliError> {
    let Some(cfg) = cfg else {
        return Ok(args);
    };
    let mut current = match serde_json::to_value(&args) {
        Ok(Value::Object(m)) => m,
        _ => unreachable!("argument structs serialize to objects"),
    };
    for (key, value) in cfg {
        match current.get_mut(key) {
            Some(slot) if slot.is_null() => *slot = value.clone(),
            Some(_) => {}
            None => return Err(CliError::Schema(format!("config: unknown key `{key}`"))),
        }
    }
    serde_json::from_value(Value::Object(current)).map_err(|e| CliError::Schema(format!("config: {e}")))
}

pub fn required<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Schema(format!("missing --{flag} (flag or config key)")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct A {
        beta: Option<f64>,
        rounds: Option<usize>,
    }

    #[test]
    fn flags_override_config() {
        let cfg: Map<String, Value> = serde_json::from_str(r#"{"beta": 2.0, "rounds": 5}"#).unwrap();
        let a = merge(
            A {
                beta: Some(3.0),
                rounds: None,
            },
            &Some(cfg),
        )
        .unwrap();
        assert_eq!(
            a,
            A {
                beta: Some(3.0),
                rounds: Some(5)
            }
        );
    }

    #[test]
    fn unknown_and_mistyped_keys_are_schema_errors() {
        let cfg: Map<String, Value> = serde_json::from_str(r#"{"gamma": 2.0}"#).unwrap();
        let err = merge(
            A {
                beta: None,
                rounds: None,
            },
            &Some(cfg),
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let cfg: Map<String, Value> = serde_json::from_str(r#"{"rounds": "many"}"#).unwrap();
        assert_eq!(
            merge(
                A {
                    beta: None,
                    rounds: None
                },
                &Some(cfg)
            )
            .unwrap_err()
            .exit_code(),
            2
        );
    }

    #[test]
    fn exit_codes_by_error_kind() {
        let p = CliError::Core(Error::Parameter {
            name: "beta",
            reason: String::new(),
        });
        assert_eq!((p.exit_code(), p.parameter()), (3, Some("beta")));
        let d = CliError::Core(Error::DegenerateRadius {
            point: lipselect::PointId(0),
            delta_min: 1e-9,
        });
        assert_eq!(d.exit_code(), 4);
        let wrapped = CliError::Core(Error::Anchor {
            round: 1,
            point: lipselect::PointId(0),
            source: Box::new(Error::Convergence {
                sweeps: 1,
                residual: 1.0,
            }),
        });
        assert_eq!(wrapped.exit_code(), 4);
        assert_eq!(CliError::Core(Error::Config(String::new())).exit_code(), 2);
    }
}
