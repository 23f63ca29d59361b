use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("graph `{graph}`: {rule}")]
    InvalidGraph { graph: String, rule: String },

    #[error("graph `{0}`: missing node labels")]
    MissingNodeLabels(String),

    #[error("graph `{0}`: homophily undefined (no edges)")]
    NoEdges(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("empty graph `{0}`")]
    EmptyGraph(String),

    #[error("{op}: shape mismatch {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("{op}: index {index} out of range for length {len}")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        len: usize,
    },

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("matrix is not symmetric: |m[{row}][{col}] - m[{col}][{row}]| = {diff:e}")]
    NotSymmetric { row: usize, col: usize, diff: f64 },

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("graph `{graph}`: path enumeration exceeded {limit} paths")]
    PathLimit { graph: String, limit: usize },

    #[error("fingerprint mismatch: {0}")]
    FingerprintMismatch(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("undefined cosine: zero-norm vector")]
    ZeroNorm,

    #[error("zero rank variance")]
    ZeroVariance,

    #[error("requested {requested} pairs but only {available} distinct pairs exist")]
    TooManyPairs { requested: usize, available: usize },

    #[error("graph `{graph}`: attribute {attr} value {value} outside embedding range {size}")]
    AttrOutOfRange {
        graph: String,
        attr: usize,
        value: u32,
        size: usize,
    },

    #[error("graph `{graph}`: expected {expected} node attributes, found {found}")]
    AttrCountMismatch {
        graph: String,
        expected: usize,
        found: usize,
    },

    #[error("task count mismatch: model has {expected}, data has {found}")]
    TaskCountMismatch { expected: usize, found: usize },

    #[error("model has no classification head")]
    MissingHead,

    #[error("AUC undefined: labels contain a single class")]
    AucUndefined,

    #[error("corpus has no graph labels")]
    MissingGraphLabels,

    #[error("non-finite loss on batch {batch:?}")]
    NonFiniteLoss { batch: Vec<String> },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("corpus `{corpus}`: rewiring did not reach homophily {target} within {iterations} iterations")]
    RewiringFailed {
        corpus: String,
        target: f64,
        iterations: usize,
    },
}

impl Error {
    /// Failures that come from the numerics rather than from the input data.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. } | Error::NonFiniteLoss { .. } | Error::RewiringFailed { .. }
        )
    }

    pub(crate) fn invalid(graph: &str, rule: impl Into<String>) -> Self {
        Error::InvalidGraph {
            graph: graph.into(),
            rule: rule.into(),
        }
    }
}
