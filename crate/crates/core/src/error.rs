use thiserror::Error;

/// Errors raised by the simulator, the reconstruction routines and the I/O layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty state")]
    EmptyState,

    #[error("photon number {found} exceeds truncation {max}")]
    Truncation { found: usize, max: usize },

    #[error("unknown channel `{0}`")]
    UnknownChannel(String),

    #[error("duplicate ket `{0}` in requested basis")]
    DuplicateKet(String),

    #[error("unrouted mode `{0}`")]
    UnroutedMode(String),

    #[error("invalid ket string `{0}`")]
    InvalidKet(String),

    #[error("outside perturbative regime: |beta|^2 = {0} (must be < 0.2)")]
    Perturbative(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("herald never fires (probability {0:e})")]
    HeraldNeverFires(f64),

    #[error("no post-selected support")]
    NoPostSelectedSupport,

    #[error("forced zero violated: weight {weight:e} outside the allowed block (tolerance {tol:e})")]
    ForcedZeroViolated { weight: f64, tol: f64 },

    #[error("unphysical input: {0}")]
    UnphysicalInput(String),

    #[error("unphysical matrix: eigenvalue {0:e}")]
    UnphysicalMatrix(f64),

    #[error("underdetermined fit: {0} points (need at least 3)")]
    UnderdeterminedFit(usize),

    #[error("degenerate colors: blue and red wavelengths coincide")]
    DegenerateColors,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("missing data for {0}")]
    MissingData(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input: {0}")]
    Parse(String),
}

/// Coarse classification used by the command-line front end to pick an exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numeric,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Parse(_) | Error::InvalidParameter(_) | Error::InvalidKet(_) => {
                ErrorKind::Config
            }
            Error::Io { .. } => ErrorKind::Io,
            _ => ErrorKind::Numeric,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
