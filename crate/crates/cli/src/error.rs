//! CLI error kinds, each with a distinct exit code and a one-line
//! machine-parsable stderr form. The exit-code table lives in `docs/cli.md`.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad flags or unparsable/invalid config file.
    Config,
    /// Filesysten failure while reading or writing artifacts.
    Io,
    /// A pipeline stage was invoked before its inputs exist.
    MissingArtifacts,
    /// An artifact exists but does not load or validate.
    BadArtifact,
    /// Training produced a non-finite loss.
    Divergence,
    /// Anything else.
    Internal,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Io => 3,
            ErrorKind::MissingArtifacts => 4,
            ErrorKind::BadArtifact => 5,
            ErrorKind::Divergence => 6,
            ErrorKind::Internal => 7,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorKind::Config => "config",
            ErrorKind::Io => "io",
            ErrorKind::MissingArtifacts => "missing_artifacts",
            ErrorKind::BadArtifact => "bad_artifact",
            ErrorKind::Divergence => "divergence",
            ErrorKind::Internal => "internal",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ErrorKind, message: String) -> Self {
        Self { kind, message }
    }

    /// The single stderr line: `error: kind=<kind> detail=<message>`.
    pub fn stderr_line(&self) -> String {
        let flat = self.message.replace('\n', " ");
        format!("error: kind={} detail={}", self.kind.name(), flat)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.stderr_line())
    }
}

impl std::error::Error for CliError {}

/// Maps core errors onto CLI error kinds.
pub fn from_core(e: lesion_core::Error, context: &str) -> CliError {
    use lesion_core::Error as E;
    let kind = match &e {
        E::Io(_) => ErrorKind::Io,
        E::MalformedFile(_) | E::VersionMismatch { .. } | E::ShapeChain { .. } => {
            ErrorKind::BadArtifact
        }
        E::Divergence { .. } => ErrorKind::Divergence,
        E::Trial { source, .. } => {
            return from_core_inner(source, context);
        }
        E::InvalidConfig(_) => ErrorKind::Config,
        _ => ErrorKind::Internal,
    };
    CliError::new(kind, format!("{context}: {e}"))
}

fn from_core_inner(e: &lesion_core::Error, context: &str) -> CliError {
    use lesion_core::Error as E;
    let kind = match e {
        E::Divergence { .. } => ErrorKind::Divergence,
        E::Io(_) => ErrorKind::Io,
        _ => ErrorKind::Internal,
    };
    CliError::new(kind, format!("{context}: {e}"))
}

pub fn io_err(e: std::io::Error, what: &str) -> CliError {
    CliError::new(ErrorKind::Io, format!("{what}: {e}"))
}
