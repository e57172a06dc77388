use std::fmt;

/// Failure carrying its process exit code. Code 2 is a usage or input
/// validation problem; code 3 is a backend or execution failure.
#[derive(Debug)]
pub struct CliError {
    code: i32,
    source: anyhow::Error,
}

impl CliError {
    pub fn usage(source: impl Into<anyhow::Error>) -> Self {
        CliError { code: 2, source: source.into() }
    }

    pub fn backend(source: impl Into<anyhow::Error>) -> Self {
        CliError { code: 3, source: source.into() }
    }

    pub fn code(&self) -> i32 {
        self.code
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.source)
    }
}
