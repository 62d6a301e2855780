use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// A problem located at a field of the manifest.
    #[error("{path}: {message}")]
    Field { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn field(path: impl Into<String>, message: impl ToString) -> Self {
        CliError::Field { path: path.into(), message: message.to_string() }
    }

    pub fn run(e: impl ToString) -> Self {
        CliError::Run(e.to_string())
    }
}
