use std::path::PathBuf;

use crate::expr::ExprError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown key `{key}`")]
    UnknownKey { key: String },
    #[error("key `{key}` expects {expected}, got `{value}`")]
    TypeMismatch { key: String, expected: &'static str, value: String },
    #[error("missing required `{key}`: {reason}")]
    MissingRequired { key: String, reason: String },
    #[error("key `{key}` has unknown value `{value}`, allowed {{{allowed}}}")]
    UnknownValue { key: String, value: String, allowed: String },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("key `{key}`: file `{}` does not exist", path.display())]
    MissingFile { key: String, path: PathBuf },
    #[error("key `{key}`: {source}")]
    Expression { key: String, source: ExprError },
}

impl ConfigError {
    pub fn kind(&self) -> &'static str {
        match self {
            ConfigError::UnknownKey { .. } => "UnknownKey",
            ConfigError::TypeMismatch { .. } => "TypeMismatch",
            ConfigError::MissingRequired { .. } => "MissingRequired",
            ConfigError::UnknownValue { .. } => "UnknownValue",
            ConfigError::Syntax { .. } => "Syntax",
            ConfigError::MissingFile { .. } => "MissingFile",
            ConfigError::Expression { .. } => "Expression",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{}: {message}", path.display())]
    Layout { path: PathBuf, message: String },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Numerical(#[from] mixedwave_core::Error),
    #[error("{failed} of {total} checks failed")]
    Acceptance { failed: usize, total: usize },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) | CliError::Format(_) | CliError::Io { .. } => "config",
            CliError::Numerical(_) => "numerical",
            CliError::Acceptance { .. } => "acceptance",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 2,
            "numerical" => 3,
            _ => 4,
        }
    }

    /// `<category>:<kind>: <message>` on one line.
    pub fn report_line(&self) -> String {
        let kind = match self {
            CliError::Config(c) => c.kind(),
            CliError::Format(_) => "Format",
            CliError::Io { .. } => "Io",
            CliError::Numerical(_) => "Numerical",
            CliError::Acceptance { .. } => "Acceptance",
        };
        let message = self.to_string().replace('\n', " ");
        format!("{}:{kind}: {message}", self.category())
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
