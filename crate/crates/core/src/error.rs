use std::path::PathBuf;

/// Everything that can go wrong in a run.
///
/// Variants are split so the CLI can map them onto its exit-code
/// taxonomy: [`Error::is_validation`] errors are user errors (exit 1),
/// the rest are runtime invariant failures (exit 2).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParameter { key: &'static str, reason: String },

    #[error("unknown scenario key `{0}`")]
    UnknownKey(String),

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("unknown basis ket `{0}`")]
    UnknownKet(String),

    #[error("index out of range: {what} = {index} (limit {limit})")]
    IndexOutOfRange { what: &'static str, index: i64, limit: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("basis size {size} exceeds cap {cap}")]
    SpaceTooLarge { size: usize, cap: usize },

    #[error("norm drift {drift:.3e} at t = {t:.3} fs exceeds 1e-6")]
    NormDrift { t: f64, drift: f64 },

    #[error("point outside domain: {0}")]
    OutsideDomain(String),

    #[error("conditional slice at y = {y}, z = {z} is degenerate (norm {norm:.3e})")]
    DegenerateSlice { y: f64, z: f64, norm: f64 },

    #[error("initial state is not a product state; sampling needs a product state")]
    NonProductState,

    #[error("time {requested} fs not covered by series [{start}, {end}]")]
    TimeOutOfRange { requested: f64, start: f64, end: f64 },

    #[error("ensemble time {ensemble} fs does not match state time {state} fs")]
    MismatchedTimes { ensemble: f64, state: f64 },

    #[error("{aborted} of {total} trajectories aborted (limit 5%)")]
    TooManyAborts { aborted: usize, total: usize },

    #[error("{0}")]
    Insufficient(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("missing input {0}")]
    MissingInput(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad input rather than by the physics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::UnknownKey(_)
                | Error::Parse { .. }
                | Error::UnknownKet(_)
                | Error::SpaceTooLarge { .. }
                | Error::MissingInput(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
