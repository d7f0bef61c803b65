//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // -- taxonomy config --
    #[error("duplicate node id `{0}`")]
    DuplicateId(String),
    #[error("node `{node}` references missing parent `{parent}`")]
    OrphanParent { node: String, parent: String },
    #[error("cyclic parent chain at node `{0}`")]
    CyclicParent(String),
    #[error("node `{node}` id is not its parent id `{parent}` plus one slug segment")]
    PathEncoding { node: String, parent: String },
    #[error("attribute `{attribute}` on node `{node}` redefines an inherited attribute")]
    AttributeRedefinition { node: String, attribute: String },
    #[error("node `{node}` declares path group {given:?} but its tree root is {root:?}")]
    PathGroupMismatch {
        node: String,
        given: String,
        root: String,
    },
    #[error("exclusion group mixes path groups (contains `{a}` and `{b}`)")]
    ExclusionGroupMixed { a: String, b: String },
    #[error("exclusion group references unknown node `{0}`")]
    ExclusionGroupUnknown(String),
    #[error("unknown taxonomy node `{0}`")]
    UnknownNode(String),
    #[error("depth {depth} exceeds depth of node `{node}`")]
    DepthOutOfRange { node: String, depth: usize },
    #[error("taxonomy config: {0}")]
    TaxonomyConfig(String),

    // -- annotation files --
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown category `{category}` in annotation (event at t={t})")]
    UnknownCategory { category: String, t: f64 },
    #[error("segments differ: [{0}, {1}] vs [{2}, {3}]")]
    SegmentMismatch(f64, f64, f64, f64),
    #[error("game-status alternation broken at t={t}: {detail}")]
    StatusAlternation { t: f64, detail: String },
    #[error("input intervals overlap at [{0}, {1}]")]
    OverlappingIntervals(f64, f64),

    // -- metrics / agreement --
    #[error("tolerance window missing or non-positive for category `{0}`")]
    BadTolerance(String),
    #[error("prediction at t={0} has no confidence score")]
    MissingScore(f64),
    #[error("need at least 2 annotation docs, got {0}")]
    TooFewDocs(usize),

    // -- spotting --
    #[error("score stream frame {0} is missing or out of order")]
    NonUniformFrames(usize),
    #[error("score {score} out of [0, 1] at frame {frame}, category `{category}`")]
    ScoreOutOfRange {
        frame: usize,
        category: String,
        score: f64,
    },
    #[error("category `{0}` missing from spotter config")]
    CategoryNotConfigured(String),
    #[error("category `{0}` not present in score stream")]
    UnknownStreamCategory(String),
    #[error("nms window must be positive, got {0}")]
    BadNmsWindow(f64),
    #[error("empty hyper-parameter search space")]
    EmptySearchSpace,

    // -- synthgen --
    #[error("infeasible generator parameters: {0}")]
    InfeasibleModel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
