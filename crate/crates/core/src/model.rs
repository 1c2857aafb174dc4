//! Shared domain types: the five-category error taxonomy, the severity scale,
//! corpus items, annotations and the project container.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::DecisionTree;

/// Exact score type. Severities are integers, the ADP weight and the
/// cross-annotator mean introduce halves and quarters.
pub type Score = Ratio<i64>;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

id_type!(
    /// Corpus segment identifier, unique within a project.
    SegmentId
);
id_type!(
    /// MT system identifier.
    SystemId
);
id_type!(
    /// Annotator identifier.
    AnnotatorId
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ErrorGroup {
    Fluency,
    MeaningTransfer,
    Adaptation,
}

impl ErrorGroup {
    pub const ALL: [ErrorGroup; 3] = [ErrorGroup::Fluency, ErrorGroup::MeaningTransfer, ErrorGroup::Adaptation];

    pub fn label(self) -> &'static str {
        match self {
            ErrorGroup::Fluency => "Fluency",
            ErrorGroup::MeaningTransfer => "Meaning Transfer",
            ErrorGroup::Adaptation => "Adaptation",
        }
    }
}

/// One of the five error categories. Declaration order is the protocol order
/// and the sheet column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ErrorCategory {
    #[serde(rename = "FLU")]
    Flu,
    #[serde(rename = "PRN")]
    Prn,
    #[serde(rename = "TRM")]
    Trm,
    #[serde(rename = "GSMIS")]
    Gsmis,
    #[serde(rename = "ADP")]
    Adp,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 5] = [
        ErrorCategory::Flu,
        ErrorCategory::Prn,
        ErrorCategory::Trm,
        ErrorCategory::Gsmis,
        ErrorCategory::Adp,
    ];

    pub const MEANING_TRANSFER: [ErrorCategory; 3] = [ErrorCategory::Prn, ErrorCategory::Trm, ErrorCategory::Gsmis];

    pub fn code(self) -> &'static str {
        match self {
            ErrorCategory::Flu => "FLU",
            ErrorCategory::Prn => "PRN",
            ErrorCategory::Trm => "TRM",
            ErrorCategory::Gsmis => "GSMIS",
            ErrorCategory::Adp => "ADP",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorCategory::Flu => "Fluency",
            ErrorCategory::Prn => "Proper Name",
            ErrorCategory::Trm => "Dialect-Specific Term",
            ErrorCategory::Gsmis => "General Semantic Mistranslation",
            ErrorCategory::Adp => "Adaptation",
        }
    }

    pub fn group(self) -> ErrorGroup {
        match self {
            ErrorCategory::Flu => ErrorGroup::Fluency,
            ErrorCategory::Prn | ErrorCategory::Trm | ErrorCategory::Gsmis => ErrorGroup::MeaningTransfer,
            ErrorCategory::Adp => ErrorGroup::Adaptation,
        }
    }

    pub fn is_meaning_transfer(self) -> bool {
        self.group() == ErrorGroup::MeaningTransfer
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown error category `{0}`")]
pub struct UnknownCategory(pub String);

impl FromStr for ErrorCategory {
    type Err = UnknownCategory;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ErrorCategory::ALL
            .into_iter()
            .find(|c| c.code().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownCategory(s.to_owned()))
    }
}

/// Ordinal severity: 0 no error, 1 minor, 2 major. No other level exists.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Severity {
    #[default]
    NoError = 0,
    Minor = 1,
    Major = 2,
}

impl Severity {
    pub const ALL: [Severity; 3] = [Severity::NoError, Severity::Minor, Severity::Major];

    pub fn level(self) -> u8 {
        self as u8
    }

    pub fn is_error(self) -> bool {
        self != Severity::NoError
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("severity must be 0, 1 or 2 (got {0})")]
pub struct SeverityOutOfRange(pub u8);

impl TryFrom<u8> for Severity {
    type Error = SeverityOutOfRange;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(Severity::NoError),
            1 => Ok(Severity::Minor),
            2 => Ok(Severity::Major),
            other => Err(SeverityOutOfRange(other)),
        }
    }
}

impl From<Severity> for u8 {
    fn from(s: Severity) -> u8 {
        s.level()
    }
}

/// Total map from category to severity. Categories that were never set read
/// as [`Severity::NoError`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(
    from = "BTreeMap<ErrorCategory, Severity>",
    into = "BTreeMap<ErrorCategory, Severity>"
)]
pub struct Severities([Severity; 5]);

impl Severities {
    pub fn get(&self, c: ErrorCategory) -> Severity {
        self.0[c.index()]
    }

    pub fn set(&mut self, c: ErrorCategory, s: Severity) {
        self.0[c.index()] = s;
    }

    pub fn with(mut self, c: ErrorCategory, s: Severity) -> Self {
        self.set(c, s);
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (ErrorCategory, Severity)> + '_ {
        ErrorCategory::ALL.into_iter().map(|c| (c, self.get(c)))
    }

    /// First meaning-transfer category carrying an error, if any.
    pub fn meaning_transfer_error(&self) -> Option<ErrorCategory> {
        ErrorCategory::MEANING_TRANSFER
            .into_iter()
            .find(|&c| self.get(c).is_error())
    }
}

impl From<BTreeMap<ErrorCategory, Severity>> for Severities {
    fn from(map: BTreeMap<ErrorCategory, Severity>) -> Self {
        let mut s = Severities::default();
        for (c, v) in map {
            s.set(c, v);
        }
        s
    }
}

impl From<Severities> for BTreeMap<ErrorCategory, Severity> {
    fn from(s: Severities) -> Self {
        s.iter().collect()
    }
}

impl FromIterator<(ErrorCategory, Severity)> for Severities {
    fn from_iter<I: IntoIterator<Item = (ErrorCategory, Severity)>>(iter: I) -> Self {
        let mut s = Severities::default();
        for (c, v) in iter {
            s.set(c, v);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub id: SegmentId,
    pub source_da: String,
    pub gold_msa: String,
}

impl Segment {
    pub fn new(id: impl Into<SegmentId>, source_da: impl Into<String>, gold_msa: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            source_da: source_da.into(),
            gold_msa: gold_msa.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemOutput {
    pub segment_id: SegmentId,
    pub system_id: SystemId,
    pub hypothesis: String,
}

/// Identifies the judged item and who judged it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AnnotationKey {
    pub annotator_id: AnnotatorId,
    pub segment_id: SegmentId,
    pub system_id: SystemId,
}

/// One annotator's five severity judgments for one (segment, system) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub annotator_id: AnnotatorId,
    pub segment_id: SegmentId,
    pub system_id: SystemId,
    pub severities: Severities,
    pub adp_applicable: bool,
    pub revision: u64,
}

impl Annotation {
    /// Builds revision 1 of an annotation, deriving ADP applicability from the
    /// meaning-transfer severities.
    pub fn new(
        annotator_id: impl Into<AnnotatorId>,
        segment_id: impl Into<SegmentId>,
        system_id: impl Into<SystemId>,
        severities: Severities,
    ) -> Self {
        Self {
            annotator_id: annotator_id.into(),
            segment_id: segment_id.into(),
            system_id: system_id.into(),
            adp_applicable: severities.meaning_transfer_error().is_none(),
            severities,
            revision: 1,
        }
    }

    pub fn with_revision(mut self, revision: u64) -> Self {
        self.revision = revision;
        self
    }

    pub fn key(&self) -> AnnotationKey {
        AnnotationKey {
            annotator_id: self.annotator_id.clone(),
            segment_id: self.segment_id.clone(),
            system_id: self.system_id.clone(),
        }
    }

    pub fn severity(&self, c: ErrorCategory) -> Severity {
        self.severities.get(c)
    }

    /// Same item, same judgment; revision ignored.
    pub fn same_judgment(&self, other: &Annotation) -> bool {
        self.key() == other.key() && self.severities == other.severities && self.adp_applicable == other.adp_applicable
    }

    /// Violations of the adaptation gating rule. Does not look at references.
    pub fn gating_violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let adp = self.severity(ErrorCategory::Adp);
        if let Some(category) = self.severities.meaning_transfer_error() {
            if adp.is_error() {
                out.push(Violation::AdpDespiteMeaningTransfer { category });
            }
            if self.adp_applicable {
                out.push(Violation::AdpApplicableDespiteMeaningTransfer { category });
            }
        } else if !self.adp_applicable && adp.is_error() {
            out.push(Violation::AdpScoredWhileNotApplicable);
        }
        out
    }
}

/// A broken annotation rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Violation {
    #[error("ADP assessed despite meaning-transfer error ({category})")]
    AdpDespiteMeaningTransfer { category: ErrorCategory },
    #[error("ADP marked applicable despite meaning-transfer error ({category})")]
    AdpApplicableDespiteMeaningTransfer { category: ErrorCategory },
    #[error("ADP scored while marked not applicable")]
    AdpScoredWhileNotApplicable,
    #[error("unknown segment `{segment_id}`")]
    UnknownSegment { segment_id: SegmentId },
    #[error("no output of system `{system_id}` for segment `{segment_id}`")]
    UnknownSystemOutput { segment_id: SegmentId, system_id: SystemId },
    #[error("unknown annotator `{annotator_id}`")]
    UnknownAnnotator { annotator_id: AnnotatorId },
}

impl Violation {
    pub fn is_gating(&self) -> bool {
        matches!(
            self,
            Violation::AdpDespiteMeaningTransfer { .. }
                | Violation::AdpApplicableDespiteMeaningTransfer { .. }
                | Violation::AdpScoredWhileNotApplicable
        )
    }

    /// Category the violation is about, when it concerns one.
    pub fn category(&self) -> Option<ErrorCategory> {
        match self {
            Violation::AdpDespiteMeaningTransfer { category }
            | Violation::AdpApplicableDespiteMeaningTransfer { category } => Some(*category),
            Violation::AdpScoredWhileNotApplicable => Some(ErrorCategory::Adp),
            _ => None,
        }
    }
}

/// Checks the gating invariants and that every reference resolves in `project`.
pub fn validate_annotation(a: &Annotation, project: &Project) -> Result<(), Vec<Violation>> {
    let mut violations = a.gating_violations();
    if project.segment(&a.segment_id).is_none() {
        violations.push(Violation::UnknownSegment {
            segment_id: a.segment_id.clone(),
        });
    } else if project.output(&a.segment_id, &a.system_id).is_none() {
        violations.push(Violation::UnknownSystemOutput {
            segment_id: a.segment_id.clone(),
            system_id: a.system_id.clone(),
        });
    }
    if !project.has_annotator(&a.annotator_id) {
        violations.push(Violation::UnknownAnnotator {
            annotator_id: a.annotator_id.clone(),
        });
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    PerAnnotator(AnnotatorId),
    MeanAcrossAnnotators,
}

/// How the three meaning-transfer severities collapse into one ordinal level.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeaningTransferRule {
    #[default]
    Max,
    CappedSum,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoringConfig {
    #[serde(with = "ratio_str")]
    pub adp_weight: Score,
    #[serde(with = "ratio_str")]
    pub minor_upper: Score,
    pub min_project_size: usize,
    pub annotator_aggregation: Aggregation,
    #[serde(default)]
    pub meaning_transfer: MeaningTransferRule,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            adp_weight: Score::new(1, 2),
            minor_upper: Score::from_integer(1),
            min_project_size: 200,
            annotator_aggregation: Aggregation::MeanAcrossAnnotators,
            meaning_transfer: MeaningTransferRule::Max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("adp_weight must lie in (0, 1], got {0}")]
    AdpWeight(Score),
    #[error("minor_upper must be positive, got {0}")]
    MinorUpper(Score),
}

impl ScoringConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let zero = Score::from_integer(0);
        if self.adp_weight <= zero || self.adp_weight > Score::from_integer(1) {
            return Err(ConfigError::AdpWeight(self.adp_weight));
        }
        if self.minor_upper <= zero {
            return Err(ConfigError::MinorUpper(self.minor_upper));
        }
        Ok(())
    }
}

/// Rationals as `"n/d"` strings (or plain integers) in documents.
pub mod ratio_str {
    use super::Score;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Score, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&r.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Score, D::Error> {
        let raw = String::deserialize(d)?;
        parse(&raw).map_err(D::Error::custom)
    }

    pub fn parse(raw: &str) -> Result<Score, String> {
        let raw = raw.trim();
        if let Some((n, d)) = raw.split_once('/') {
            let n: i64 = n.trim().parse().map_err(|e| format!("bad numerator in `{raw}`: {e}"))?;
            let d: i64 = d
                .trim()
                .parse()
                .map_err(|e| format!("bad denominator in `{raw}`: {e}"))?;
            if d == 0 {
                return Err(format!("zero denominator in `{raw}`"));
            }
            Ok(Score::new(n, d))
        } else if let Some((int, frac)) = raw.split_once('.') {
            let digits = frac.len() as u32;
            let scale = 10i64
                .checked_pow(digits)
                .ok_or_else(|| format!("too many decimals in `{raw}`"))?;
            let joined: i64 = format!("{int}{frac}")
                .parse()
                .map_err(|e| format!("bad decimal `{raw}`: {e}"))?;
            Ok(Score::new(joined, scale))
        } else {
            raw.parse::<i64>()
                .map(Score::from_integer)
                .map_err(|e| format!("bad number `{raw}`: {e}"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("duplicate segment id `{0}`")]
    DuplicateSegment(SegmentId),
    #[error("segment `{0}` has empty source or gold text")]
    EmptySegmentText(SegmentId),
    #[error("duplicate output of system `{system_id}` for segment `{segment_id}`")]
    DuplicateOutput { segment_id: SegmentId, system_id: SystemId },
    #[error("output references unknown segment `{0}`")]
    UnknownSegment(SegmentId),
    #[error("annotation rejected: {}", join_violations(.0))]
    InvalidAnnotation(Vec<Violation>),
    #[error("revision {revision} for {annotator_id}/{segment_id}/{system_id} appears more than once")]
    DuplicateRevision {
        annotator_id: AnnotatorId,
        segment_id: SegmentId,
        system_id: SystemId,
        revision: u64,
    },
    #[error("stale revision {submitted}: current revision is {current}")]
    StaleRevision { submitted: u64, current: u64 },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

pub(crate) fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Corpus, system outputs, annotators, protocol and the annotation log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Project {
    pub name: String,
    pub segments: Vec<Segment>,
    pub outputs: Vec<SystemOutput>,
    pub annotators: Vec<AnnotatorId>,
    pub taxonomy: DecisionTree,
    pub config: ScoringConfig,
    /// Append-only. Use [`Project::append_annotation`] to add entries.
    pub annotations: Vec<Annotation>,
}

impl Project {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            segments: Vec::new(),
            outputs: Vec::new(),
            annotators: Vec::new(),
            taxonomy: DecisionTree::default_tree(),
            config: ScoringConfig::default(),
            annotations: Vec::new(),
        }
    }

    pub fn segment(&self, id: &SegmentId) -> Option<&Segment> {
        self.segments.iter().find(|s| &s.id == id)
    }

    pub fn segment_by_text(&self, source_da: &str, gold_msa: &str) -> Option<&Segment> {
        self.segments
            .iter()
            .find(|s| s.source_da == source_da && s.gold_msa == gold_msa)
    }

    pub fn output(&self, segment: &SegmentId, system: &SystemId) -> Option<&SystemOutput> {
        self.outputs
            .iter()
            .find(|o| &o.segment_id == segment && &o.system_id == system)
    }

    /// Systems in order of first appearance among the outputs.
    pub fn systems(&self) -> Vec<SystemId> {
        let mut seen = HashSet::new();
        self.outputs
            .iter()
            .filter(|o| seen.insert(&o.system_id))
            .map(|o| o.system_id.clone())
            .collect()
    }

    pub fn has_annotator(&self, id: &AnnotatorId) -> bool {
        self.annotators.contains(id)
    }

    pub fn add_segment(&mut self, segment: Segment) -> Result<(), ModelError> {
        if segment.source_da.trim().is_empty() || segment.gold_msa.trim().is_empty() {
            return Err(ModelError::EmptySegmentText(segment.id));
        }
        if self.segment(&segment.id).is_some() {
            return Err(ModelError::DuplicateSegment(segment.id));
        }
        self.segments.push(segment);
        Ok(())
    }

    pub fn add_output(&mut self, output: SystemOutput) -> Result<(), ModelError> {
        if self.segment(&output.segment_id).is_none() {
            return Err(ModelError::UnknownSegment(output.segment_id));
        }
        if self.output(&output.segment_id, &output.system_id).is_some() {
            return Err(ModelError::DuplicateOutput {
                segment_id: output.segment_id,
                system_id: output.system_id,
            });
        }
        self.outputs.push(output);
        Ok(())
    }

    /// Registers an annotator; no-op when already present.
    pub fn add_annotator(&mut self, id: AnnotatorId) {
        if !self.has_annotator(&id) {
            self.annotators.push(id);
        }
    }

    /// Next free segment id of the form `seg-0001`.
    pub fn next_segment_id(&self) -> SegmentId {
        let mut n = self.segments.len() + 1;
        loop {
            let id = SegmentId::new(format!("seg-{n:04}"));
            if self.segment(&id).is_none() {
                return id;
            }
            n += 1;
        }
    }

    /// Highest revision recorded for the triple, 0 when none.
    pub fn current_revision(&self, key: &AnnotationKey) -> u64 {
        self.annotations
            .iter()
            .filter(|a| {
                a.annotator_id == key.annotator_id && a.segment_id == key.segment_id && a.system_id == key.system_id
            })
            .map(|a| a.revision)
            .max()
            .unwrap_or(0)
    }

    /// Appends a validated annotation. Its revision must exceed every revision
    /// already logged for the same triple.
    pub fn append_annotation(&mut self, a: Annotation) -> Result<(), ModelError> {
        validate_annotation(&a, self).map_err(ModelError::InvalidAnnotation)?;
        let current = self.current_revision(&a.key());
        if a.revision <= current {
            return Err(ModelError::StaleRevision {
                submitted: a.revision,
                current,
            });
        }
        self.annotations.push(a);
        Ok(())
    }

    /// The highest-revision annotation for every annotated triple.
    pub fn authoritative_annotations(&self) -> Result<BTreeMap<AnnotationKey, &Annotation>, ModelError> {
        let mut out: BTreeMap<AnnotationKey, &Annotation> = BTreeMap::new();
        let mut seen = HashSet::new();
        for a in &self.annotations {
            let key = a.key();
            if !seen.insert((key.clone(), a.revision)) {
                return Err(ModelError::DuplicateRevision {
                    annotator_id: key.annotator_id,
                    segment_id: key.segment_id,
                    system_id: key.system_id,
                    revision: a.revision,
                });
            }
            match out.get(&key) {
                Some(prev) if prev.revision >= a.revision => {}
                _ => {
                    out.insert(key, a);
                }
            }
        }
        Ok(out)
    }

    /// Checks every structural invariant; used after loading from disk.
    pub fn check_invariants(&self) -> Result<(), ModelError> {
        self.config.validate()?;
        let mut rebuilt = Project {
            segments: Vec::new(),
            outputs: Vec::new(),
            annotations: Vec::new(),
            ..self.clone()
        };
        for s in &self.segments {
            rebuilt.add_segment(s.clone())?;
        }
        for o in &self.outputs {
            rebuilt.add_output(o.clone())?;
        }
        for a in &self.annotations {
            validate_annotation(a, &rebuilt).map_err(ModelError::InvalidAnnotation)?;
            rebuilt.annotations.push(a.clone());
        }
        self.authoritative_annotations()?;
        Ok(())
    }

    /// Warning text when the corpus is below the configured advisory size.
    pub fn size_advisory(&self) -> Option<String> {
        (self.segments.len() < self.config.min_project_size).then(|| {
            format!(
                "corpus has {} segments, below the advisory minimum of {}",
                self.segments.len(),
                self.config.min_project_size
            )
        })
    }
}
