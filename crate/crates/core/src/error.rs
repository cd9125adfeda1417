use std::path::PathBuf;

use crate::model::Family;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Validation { field: &'static str, reason: String },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: u64,
        reason: String,
    },

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("model file {path}: format version {found} is not supported (expected 1)")]
    VersionMismatch { path: PathBuf, found: String },

    #[error(
        "model file {path}: family {family} with k={k} needs {expected} parameters, found {found}"
    )]
    ParamCount {
        path: PathBuf,
        family: Family,
        k: usize,
        expected: usize,
        found: usize,
    },

    #[error("unsupported family tag {0:?}")]
    UnsupportedFamily(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("unknown item id {0:?}")]
    UnknownId(String),

    #[error("k = {k} is out of range 1..={max}")]
    RankOutOfRange { k: usize, max: usize },

    #[error("corpus has rank {rank}, cannot extract {k} components")]
    RankDeficient { k: usize, rank: usize },

    #[error("training diverged at epoch {epoch} ({what}); try a smaller learning rate")]
    Diverged { epoch: usize, what: &'static str },

    #[error("{0} is empty")]
    Empty(&'static str),

    #[error("held-out-image fold {fold}: {reason} (training fraction reached {achieved:.4})")]
    ImageFold {
        fold: usize,
        reason: &'static str,
        achieved: f64,
    },

    #[error("family {family} cannot express asymmetry {asymmetry}")]
    Inexpressible { family: Family, asymmetry: f64 },

    #[error("fold {fold}, family {family}, k={k}: {source}")]
    Run {
        fold: usize,
        family: Family,
        k: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
