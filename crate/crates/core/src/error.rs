use alloc::string::String;

use crate::measure::Measure;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix data has {found} values, expected {rows}x{cols}")]
    MatrixShape {
        rows: usize,
        cols: usize,
        found: usize,
    },

    #[error("empty matrix ({rows}x{cols})")]
    EmptyMatrix { rows: usize, cols: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("need at least {required} runs, found {found}")]
    TooFewRuns { required: usize, found: usize },

    #[error("run {run_id}: {what} is {found}, expected {expected}")]
    ShapeMismatch {
        run_id: String,
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("{context}: label {label} at index {index} is outside 0..{num_classes}")]
    LabelOutOfRange {
        context: String,
        index: usize,
        label: u32,
        num_classes: usize,
    },

    #[error("run {run_id}: probability row {row} {reason}")]
    InvalidProbabilityRow {
        run_id: String,
        row: usize,
        reason: String,
    },

    #[error("run {run_id}: prediction {predicted} at row {row} disagrees with probability argmax {argmax}")]
    ArgmaxMismatch {
        run_id: String,
        row: usize,
        predicted: u32,
        argmax: u32,
    },

    #[error("duplicate run id {0}")]
    DuplicateRunId(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("metric {metric} requires binary labels, bundle has {num_classes} classes")]
    UnsupportedMetric {
        metric: &'static str,
        num_classes: usize,
    },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("chance agreement is 1 (every prediction is the same class); kappa undefined")]
    DegenerateMarginals,

    #[error("degenerate representation: {0}")]
    DegenerateRepresentation(String),

    #[error("{measure} unavailable: {reason}")]
    MissingCapability { measure: Measure, reason: String },

    #[error("layer {layer} out of range (bundle has {layer_count} layers)")]
    LayerOutOfRange { layer: usize, layer_count: usize },

    #[error("{group} group has {size} runs, need at least 2")]
    InsufficientGroup { group: &'static str, size: usize },

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}
