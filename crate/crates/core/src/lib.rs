//! Event taxonomy, annotation handling, and evaluation metrics for
//! timestamp-based event spotting in invasion games (soccer, handball, ...).
//!
//! The crate is organized around a small pipeline:
//!
//! 1. [`taxonomy`] loads a hierarchical event taxonomy from a config file
//!    (two configs, soccer and handball, are bundled).
//! 2. [`annotation`] parses event files into [`AnnotationDoc`]s, validates
//!    them against a taxonomy, and derives game-status / possession
//!    intervals and active-play sequences.
//! 3. [`metrics`] compares two annotations: temporal IoU for interval
//!    states, nearest-neighbour matching (NNM) with tolerance windows,
//!    temporal average precision, and sequence consistency matching (SCM)
//!    with boundary adoption.
//! 4. [`agreement`] runs the every-annotator-vs-every-other protocol and
//!    aggregates per-annotator and mean human performance.
//! 5. [`spotting`] turns per-frame classifier score streams into spotted
//!    events via 1-D NMS plus confidence thresholds, and grid-searches both
//!    hyper-parameters against a reference annotation.
//! 6. [`synthgen`] generates taxonomy-consistent synthetic matches and
//!    noisy annotator variants, used as a deterministic oracle in tests.

pub mod agreement;
pub mod annotation;
pub mod error;
pub mod metrics;
pub mod report;
pub mod spotting;
pub mod synthgen;
pub mod taxonomy;
pub mod timeline;

pub use agreement::AgreementReport;
pub use annotation::{AnnotationDoc, EventRecord, Interval, Sequence, Violation};
pub use error::{Error, Result};
pub use metrics::{HalfWidthMode, MatchMode, MatchResult, MetricReport, ToleranceSpec};
pub use spotting::{ScoreStream, SpotterConfig};
pub use synthgen::{MatchModel, NoiseModel};
pub use taxonomy::{AttributeDef, PathGroup, Taxonomy, TaxonomyNode, TimestampKind};
