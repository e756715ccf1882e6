use std::path::PathBuf;

use thiserror::Error;

use crate::robust::CoarseStageDiagnostics;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("null space is ambiguous (smallest singular values too close)")]
    AmbiguousNullSpace,

    #[error("polynomial has all-zero coefficients")]
    DegeneratePolynomial,

    #[error("point maps to a zero epipolar line (it is the epipole)")]
    EpipoleDegenerate,

    #[error("camera centres coincide; fundamental matrix undefined")]
    NoBaseline,

    #[error("point lies on the camera plane (depth {depth:e})")]
    AtCamera { depth: f64 },

    #[error("degenerate minimal sample: {0}")]
    DegenerateSample(String),

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("estimation failed: {0}")]
    EstimationFailed(String),

    #[error(
        "coarse stage kept only {} of {} correspondences",
        .0.survivors, .0.input_count
    )]
    CoarseStageExhausted(Box<CoarseStageDiagnostics>),

    #[error("epipolar lines never intersect the target image after {attempts} draws")]
    NonOverlappingGeometry { attempts: usize },

    #[error("pruner contract violated: {0}")]
    ContractViolation(String),

    #[error("infeasible scene: {0}")]
    InfeasibleScene(String),

    #[error("{}:{line}: {message}", .path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
