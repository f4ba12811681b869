use std::fmt;

use turnover::Error as CoreError;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Numerical(_) => "numerical",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) => m,
        }
    }

    /// Single-line JSON record for standard error.
    pub fn to_line(&self) -> String {
        serde_json::json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.message(),
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind(), self.message())
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let text = match &e {
            CoreError::LearningRate { .. } => {
                format!("{e}; lower --learn-rate or pass --adaptive-scale")
            }
            CoreError::Instability { .. } => format!("{e}; try a smaller --step"),
            _ => e.to_string(),
        };
        if e.is_numerical() {
            CliError::Numerical(text)
        } else {
            CliError::Validation(text)
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("i/o: {e}"))
    }
}

pub fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}
