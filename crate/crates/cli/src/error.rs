//! Process-level error handling.
//!
//! Every failure is classified into one of three exit codes so scripts can
//! branch without scraping messages: `2` for configuration and input parsing
//! problems, `3` when the requested loss bound admits no model, `4` for
//! numerical failures. A machine-readable JSON record goes to stderr.

use rashomon_core::Error as CoreError;

#[derive(Debug, Clone, PartialEq)]
pub enum ErrorKind {
    /// Bad flags, malformed configuration, unreadable files.
    Config,
    /// Structurally malformed CSV (wrong field count, broken quoting).
    ParseError { row: usize, column: String },
    /// The declared target column is not in the CSV header.
    MissingTarget { target: String },
    /// A cell that must be numeric does not parse as a finite number.
    NonNumericCell { row: usize, column: String },
    /// The loss bound is below the smallest attainable loss.
    EmptyFamily,
    /// Singular geometry or non-finite values in a computation.
    Numerical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Config,
            message: message.into(),
        }
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::config(format!("{}: {err}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Config
            | ErrorKind::ParseError { .. }
            | ErrorKind::MissingTarget { .. }
            | ErrorKind::NonNumericCell { .. } => 2,
            ErrorKind::EmptyFamily => 3,
            ErrorKind::Numerical => 4,
        }
    }

    fn kind_name(&self) -> &'static str {
        match self.kind {
            ErrorKind::Config => "config",
            ErrorKind::ParseError { .. } => "parse_error",
            ErrorKind::MissingTarget { .. } => "missing_target",
            ErrorKind::NonNumericCell { .. } => "non_numeric_cell",
            ErrorKind::EmptyFamily => "empty_family",
            ErrorKind::Numerical => "numerical",
        }
    }

    /// One-line JSON for stderr; `code` always equals the process exit code.
    pub fn stderr_json(&self) -> String {
        let mut body = serde_json::json!({
            "code": self.exit_code(),
            "kind": self.kind_name(),
            "message": self.message,
        });
        match &self.kind {
            ErrorKind::ParseError { row, column }
            | ErrorKind::NonNumericCell { row, column } => {
                body["row"] = serde_json::json!(row);
                body["column"] = serde_json::json!(column);
            }
            ErrorKind::MissingTarget { target } => {
                body["target"] = serde_json::json!(target);
            }
            _ => {}
        }
        serde_json::json!({ "error": body }).to_string()
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        let kind = match err {
            CoreError::EmptyRashomon { .. } | CoreError::Infeasible { .. } => {
                ErrorKind::EmptyFamily
            }
            CoreError::NotPositiveDefinite { .. } | CoreError::TransitivityViolation { .. } => {
                ErrorKind::Numerical
            }
            _ => ErrorKind::Config,
        };
        CliError {
            kind,
            message: err.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_errors_map_to_their_exit_codes() {
        let empty: CliError = CoreError::EmptyRashomon {
            epsilon: 0.1,
            min_loss: 0.2,
        }
        .into();
        assert_eq!(empty.exit_code(), 3);
        let infeasible: CliError = CoreError::Infeasible {
            epsilon: 0.1,
            floor: 0.2,
        }
        .into();
        assert_eq!(infeasible.exit_code(), 3);
        let singular: CliError = CoreError::NotPositiveDefinite {
            pivot: 3,
            value: -1e-12,
        }
        .into();
        assert_eq!(singular.exit_code(), 4);
        let bad: CliError = CoreError::invalid("nope").into();
        assert_eq!(bad.exit_code(), 2);
    }

    #[test]
    fn stderr_json_carries_the_cell_position() {
        let err = CliError {
            kind: ErrorKind::NonNumericCell {
                row: 7,
                column: "price".into(),
            },
            message: "data row 7, column price: 'abc' is not numeric".into(),
        };
        let v: serde_json::Value = serde_json::from_str(&err.stderr_json()).unwrap();
        assert_eq!(v["error"]["code"], 2);
        assert_eq!(v["error"]["kind"], "non_numeric_cell");
        assert_eq!(v["error"]["row"], 7);
        assert_eq!(v["error"]["column"], "price");
    }
}
