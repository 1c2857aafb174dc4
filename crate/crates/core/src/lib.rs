//! Post-editing human evaluation of machine translation.
//!
//! The crate covers the error taxonomy ([`model`]), the decision-tree
//! annotation protocol ([`protocol`]), segment scoring ([`scoring`]),
//! inter-annotator agreement ([`agreement`]), sheet and project file I/O
//! ([`ingestion`]) and the report suite ([`reports`]).

pub mod agreement;
pub mod decimal;
pub mod demo;
pub mod ingestion;
pub mod model;
pub mod protocol;
pub mod reports;
pub mod scoring;

pub use model::{
    validate_annotation, Aggregation, Annotation, AnnotationKey, AnnotatorId, ErrorCategory, ErrorGroup,
    MeaningTransferRule, Project, Score, ScoringConfig, Segment, SegmentId, Severities, Severity, SystemId,
    SystemOutput, Violation,
};
pub use protocol::{finalize, DecisionTree, ProtocolState, Response};
