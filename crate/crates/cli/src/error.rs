use std::collections::BTreeMap;

use thiserror::Error;

use ptqm_core::phases::Check;
use ptqm_core::PtqmError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("invalid scenario: {0}")]
    Validation(String),

    #[error("numerical failure: {message}")]
    Numeric {
        message: String,
        residuals: BTreeMap<String, Check>,
    },

    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Parse { .. } => EXIT_PARSE,
            Self::Validation(_) | Self::Io(_) => EXIT_VALIDATION,
            Self::Numeric { .. } => EXIT_NUMERIC,
        }
    }

    pub fn numeric(e: PtqmError, residuals: &BTreeMap<String, Check>) -> Self {
        Self::Numeric {
            message: e.to_string(),
            residuals: residuals.clone(),
        }
    }

    /// Errors raised while building a model from a valid-looking scenario
    /// are configuration problems.
    pub fn setup(e: PtqmError) -> Self {
        Self::Validation(e.to_string())
    }
}

/// Fixed-width residual table, one row per check.
pub fn residual_table(residuals: &BTreeMap<String, Check>) -> String {
    let width = residuals.keys().map(String::len).max().unwrap_or(5).max(5);
    let mut out = format!("{:<width$}  {:>12}  {:>9}  status\n", "check", "residual", "tol");
    for (name, c) in residuals {
        out.push_str(&format!(
            "{name:<width$}  {:>12.4e}  {:>9.1e}  {}\n",
            c.residual,
            c.tol,
            if c.pass { "pass" } else { "FAIL" }
        ));
    }
    out
}
