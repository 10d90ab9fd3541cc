use thiserror::Error;

/// Errors raised while building a carpet or evaluating its spectra.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("the map list is empty")]
    EmptySystem,

    #[error("grouping tolerance {0} is outside (0, 1e-6]")]
    InvalidTolerance(f64),

    #[error("map {index}: ratios must be finite with 0 < b and a <= {max_ratio}")]
    RatioOutOfRange { index: usize, max_ratio: f64 },

    #[error("map {index}: vertical ratio b = {b} is not strictly below horizontal ratio a = {a}")]
    NotStrictlyWider { index: usize, a: f64, b: f64 },

    #[error("map {index}: image rectangle leaves the unit square")]
    OutOfUnitSquare { index: usize },

    #[error("maps {first} and {second} have overlapping interiors")]
    MapOverlap { first: usize, second: usize },

    #[error("columns at offsets {first} and {second} have overlapping interiors")]
    ColumnOverlap { first: f64, second: f64 },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("no sign change of the defining function on [{lo}, {hi}]")]
    BracketFailure { lo: f64, hi: f64 },

    #[error("carpet is Ahlfors-David regular (t_min = t_max); no spectrum partition exists")]
    DegenerateCarpet,

    #[error("{0}")]
    DomainError(String),

    #[error("part {0} is homogeneous; its parametrisation collapses to a single theta")]
    HomogeneousPart(usize),

    #[error("weights sum to {sum} (or contain negative / non-finite entries)")]
    NotNormalized { sum: f64 },

    #[error("w has mass at index {index} where v vanishes")]
    AbsoluteContinuityViolated { index: usize },

    #[error("enumeration exceeded the cap of {cap}")]
    CapExceeded { cap: usize },

    #[error("invalid number {0:?}: expected a decimal or a fraction p/q")]
    InvalidNumber(String),

    #[error("malformed input: {0}")]
    Input(String),
}

impl Error {
    /// Stable identifier of the variant, used by the CLI in diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptySystem => "EmptySystem",
            Error::InvalidTolerance(_) => "InvalidTolerance",
            Error::RatioOutOfRange { .. } => "RatioOutOfRange",
            Error::NotStrictlyWider { .. } => "NotStrictlyWider",
            Error::OutOfUnitSquare { .. } => "OutOfUnitSquare",
            Error::MapOverlap { .. } => "MapOverlap",
            Error::ColumnOverlap { .. } => "ColumnOverlap",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::BracketFailure { .. } => "BracketFailure",
            Error::DegenerateCarpet => "DegenerateCarpet",
            Error::DomainError(_) => "DomainError",
            Error::HomogeneousPart(_) => "HomogeneousPart",
            Error::NotNormalized { .. } => "NotNormalized",
            Error::AbsoluteContinuityViolated { .. } => "AbsoluteContinuityViolated",
            Error::CapExceeded { .. } => "CapExceeded",
            Error::InvalidNumber(_) => "InvalidNumber",
            Error::Input(_) => "Input",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
