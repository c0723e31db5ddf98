use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    /// Malformed config text. `line` is 1-based when the error has a location.
    #[error("{}", parse_message(*.line, .message))]
    Parse { line: Option<usize>, message: String },
    /// A well-formed value that violates a standing assumption or a range
    /// requirement; `assumption` is a label such as `V-1`.
    #[error("invalid `{field}` ({assumption}): {detail}")]
    Validation {
        field: String,
        assumption: String,
        detail: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("nothing to plot in {0}")]
    EmptyPlot(String),
    #[error("{context}: {message}")]
    Run { context: &'static str, message: String },
}

fn parse_message(line: Option<usize>, message: &str) -> String {
    match line {
        Some(l) => format!("config line {l}: {message}"),
        None => format!("config: {message}"),
    }
}

impl LabError {
    pub fn parse(line: Option<usize>, message: impl Into<String>) -> Self {
        Self::Parse {
            line,
            message: message.into(),
        }
    }

    pub fn validation(field: impl Into<String>, assumption: &str, detail: impl ToString) -> Self {
        Self::Validation {
            field: field.into(),
            assumption: assumption.into(),
            detail: detail.to_string(),
        }
    }

    pub fn run(context: &'static str, e: impl ToString) -> Self {
        Self::Run {
            context,
            message: e.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for config and assumption errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Parse { .. } | Self::Validation { .. } => 2,
            _ => 1,
        }
    }
}
