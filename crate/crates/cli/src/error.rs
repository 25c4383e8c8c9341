use std::fmt;

use vscl_core::Error;

/// A failure reported as `error[<class>]: <message>` on one line, with the
/// process exit code derived from the class.
#[derive(Debug)]
pub struct CliError {
    pub class: &'static str,
    pub message: String,
    pub code: i32,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { class: "config", message: message.into(), code: 2 }
    }

    pub fn missing(message: impl Into<String>) -> Self {
        CliError { class: "missing-artifact", message: message.into(), code: 2 }
    }

    pub fn io(context: &str, e: std::io::Error) -> Self {
        CliError { class: "io", message: format!("{context}: {e}"), code: 3 }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NoConvergence { .. } | Error::ZeroGradient { .. } => 4,
            _ => 3,
        };
        CliError { class: e.class(), message: e.to_string(), code }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let one_line = self.message.replace(['\n', '\r'], " ");
        write!(f, "error[{}]: {}", self.class, one_line)
    }
}

pub type CliResult<T> = Result<T, CliError>;
