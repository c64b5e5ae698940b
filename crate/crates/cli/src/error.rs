use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{module}: {source}")]
    Numerical {
        module: &'static str,
        #[source]
        source: hybridmap_core::Error,
    },
    #[error("{0}")]
    Io(String),
    #[error("{0} invariant check(s) failed")]
    ValidationFailed(usize),
}

impl CliError {
    pub fn numerical(module: &'static str) -> impl FnOnce(hybridmap_core::Error) -> Self {
        move |source| Self::Numerical { module, source }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Self::ValidationFailed(_) => 1,
            Self::Config(_) => 2,
            Self::Numerical { .. } => 3,
            Self::Io(_) => 4,
        })
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(format!("i/o error: {e}"))
    }
}
