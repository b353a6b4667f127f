use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("line {line}: {field}: {reason}")]
    Schema { line: usize, field: String, reason: String },

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("fit did not converge: {0}")]
    NotConverged(String),

    #[error(transparent)]
    Physics(#[from] afcmem::Error),
}

impl CliError {
    /// Process exit status: 1 schema or usage, 2 fit non-convergence, 3 physics.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema { .. } | CliError::Usage(_) | CliError::Io { .. } => 1,
            CliError::NotConverged(_) => 2,
            CliError::Physics(e) => match e {
                afcmem::Error::Csv { .. } | afcmem::Error::Syntax { .. } => 1,
                _ => 3,
            },
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io { path: path.as_ref().display().to_string(), source }
    }
}
