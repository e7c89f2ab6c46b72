use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("problem file: field `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error("unknown preset `{0}` (expected one of decoupled, remark, symmetric, gap)")]
    UnknownPreset(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    /// Spectral parameter fell inside (or within the guard margin of) an excluded set.
    #[error("z = {z} lies in {what} [{lo}, {hi}]")]
    Domain {
        z: f64,
        what: String,
        lo: f64,
        hi: f64,
    },

    #[error("near-singular {what} at z = {z}: |value| = {value:e}")]
    NearSingular { what: String, z: f64, value: f64 },

    #[error("operator dimension {dim} exceeds the cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("eigensolver: {0}")]
    Eigen(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by a spectral parameter landing in a forbidden set.
    pub fn is_domain(&self) -> bool {
        matches!(self, Error::Domain { .. } | Error::NearSingular { .. })
    }
}
