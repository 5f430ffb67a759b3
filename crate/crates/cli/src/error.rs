use std::fmt;
use std::path::Path;

#[derive(Debug)]
pub enum CliError {
    Core(amff::Error),
    Config(String),
    Gradcheck { failed: usize, total: usize },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Config(_) => "E_CONFIG",
            CliError::Gradcheck { .. } => "E_GRADCHECK",
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Core(amff::Error::InvalidArgument(msg.into()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Config(msg) => write!(f, "config: {msg}"),
            CliError::Gradcheck { failed, total } => {
                write!(f, "{failed} of {total} gradient checks exceed the tolerance")
            }
        }
    }
}

impl From<amff::Error> for CliError {
    fn from(e: amff::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| {
        CliError::Core(amff::Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}
