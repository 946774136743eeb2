use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure category, used by the command line to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Missing or illegible inputs, bad parameters.
    Config,
    /// Inputs were readable but violate an invariant.
    Data,
    /// Memory or similar resource exhaustion.
    Resource,
}

impl ErrorClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorClass::Config => "CONFIG",
            ErrorClass::Data => "DATA",
            ErrorClass::Resource => "RESOURCE",
        }
    }

    /// Process exit status for this class.
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Resource => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("nothing to cluster: need at least 2 subject vectors, got {0}")]
    NothingToCluster(usize),
    #[error("curation references unknown entries: {}", .0.join(", "))]
    UnknownCuration(Vec<String>),
    #[error("unmapped subject codes: {}", .0.join(", "))]
    UnmappedSubjects(Vec<String>),
    #[error("unknown label: {0}")]
    UnknownLabel(String),
    #[error("document {0} has an empty label set")]
    EmptyLabelSet(String),
    #[error("mismatched area sets between models: {0}")]
    MismatchedAreas(String),
    #[error("input digest mismatch for {input}: expected {expected}, found {found} (use --force to override)")]
    DigestMismatch {
        input: String,
        expected: String,
        found: String,
    },
    #[error("cannot allocate {what} ({dims}): {bytes} bytes")]
    Resource {
        what: String,
        dims: String,
        bytes: u128,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } | Error::Config(_) | Error::Parse { .. } | Error::DigestMismatch { .. } => {
                ErrorClass::Config
            }
            Error::UnknownCuration(_) => ErrorClass::Config,
            Error::Resource { .. } => ErrorClass::Resource,
            Error::Data(_)
            | Error::NothingToCluster(_)
            | Error::UnmappedSubjects(_)
            | Error::UnknownLabel(_)
            | Error::EmptyLabelSet(_)
            | Error::MismatchedAreas(_) => ErrorClass::Data,
        }
    }
}
