//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by layout validation, membership computation, training
/// and the file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("layout must contain at least one area")]
    EmptyLayout,

    #[error("duplicate area name `{0}`")]
    DuplicateArea(String),

    #[error("area `{name}` has a degenerate kernel ({width} x {height})")]
    DegenerateKernel { name: String, width: f64, height: f64 },

    #[error("kernel rectangles of `{0}` and `{1}` overlap")]
    OverlappingKernels(String, String),

    #[error("trajectory must contain at least one fixation")]
    EmptyTrajectory,

    #[error("sampling interval ds must be positive")]
    InvalidSamplingInterval,

    #[error("fixation #{index} has invalid coordinates ({x}, {y})")]
    InvalidCoordinates { index: usize, x: f64, y: f64 },

    #[error("fixation #{index} breaks the uniform time step (t = {t}, expected {expected})")]
    NonUniformTimeStep { index: usize, t: u32, expected: u32 },

    #[error("no kernel fixation anywhere in the corpus; attraction powers are all zero")]
    AllAttractionsZero,

    #[error("element `{0}` is outside the distribution's universe")]
    UnknownElement(String),

    #[error("duplicate universe element `{0}`")]
    DuplicateElement(String),

    #[error("possibility degrees must lie in [0, 1] with supremum exactly 1 (got {0})")]
    UnnormalizedDistribution(f64),

    #[error("Bezdek membership requires strictly positive distances (distance #{0} is 0)")]
    ZeroDistance(usize),

    #[error("fuzzifier must be > 1 (got {0})")]
    InvalidFuzzifier(f64),

    #[error("region violation: {0}")]
    RegionViolation(String),

    #[error("unknown observation symbol `{0}`")]
    UnknownSymbol(String),

    #[error("observation sequence is empty")]
    EmptySequence,

    #[error("training set contains no usable sequence")]
    EmptyTrainingSet,

    #[error("label path length {labels} does not match sequence length {symbols}")]
    LengthMismatch { symbols: usize, labels: usize },

    #[error("training corpus must span at least two classes")]
    DegenerateCorpus,

    #[error("sequence `{0}` carries no class label")]
    UnlabeledSequence(String),

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("model validation failed: {0}")]
    InvalidModel(String),

    #[error("classifier models must share one alphabet")]
    AlphabetMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("duplicate dataset entry id `{0}`")]
    DuplicateEntryId(String),

    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

}

pub type Result<T> = std::result::Result<T, Error>;
