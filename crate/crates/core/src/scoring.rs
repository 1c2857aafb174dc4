//! Segment error scores (SEGS), severity buckets, per-system severity
//! distributions and accumulated per-category totals.
//!
//! All arithmetic is exact: SEGS values are rationals (ADP weighting gives
//! halves, averaging two annotators gives quarters).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    join_violations, Aggregation, Annotation, AnnotatorId, ErrorCategory, ErrorGroup, ModelError, Project, Score,
    ScoringConfig, SegmentId, Severity, SystemId, Violation,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoringError {
    #[error("invalid annotation: {}", join_violations(.0))]
    InvalidAnnotation(Vec<Violation>),
    #[error("no annotations for the item")]
    NoAnnotations,
    #[error("system `{system_id}` lacks annotations for {} segment(s): {}", .segments.len(), list(.segments))]
    MissingAnnotations {
        system_id: SystemId,
        segments: Vec<SegmentId>,
    },
    #[error("unknown system `{0}`")]
    UnknownSystem(SystemId),
    #[error("category totals {totals} disagree with summed SEGS {segs}")]
    Inconsistent { totals: Score, segs: Score },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn list(ids: &[SegmentId]) -> String {
    ids.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
}

fn level(s: Severity) -> Score {
    Score::from_integer(i64::from(s.level()))
}

/// Weighted contribution of one category to SEGS.
fn weighted(a: &Annotation, c: ErrorCategory, cfg: &ScoringConfig) -> Score {
    let v = level(a.severity(c));
    if c == ErrorCategory::Adp {
        v * cfg.adp_weight
    } else {
        v
    }
}

/// SEGS without validation: FLU + PRN + TRM + GSMIS + adp_weight * ADP.
pub(crate) fn raw_segs(a: &Annotation, cfg: &ScoringConfig) -> Score {
    ErrorCategory::ALL.into_iter().map(|c| weighted(a, c, cfg)).sum()
}

/// Segment error score of one annotation.
pub fn segs(a: &Annotation, cfg: &ScoringConfig) -> Result<Score, ScoringError> {
    let v = a.gating_violations();
    if !v.is_empty() {
        return Err(ScoringError::InvalidAnnotation(v));
    }
    Ok(raw_segs(a, cfg))
}

/// Picks the annotations that count under the configured aggregation.
fn selected<'a>(annotations: &[&'a Annotation], cfg: &ScoringConfig) -> Result<Vec<&'a Annotation>, ScoringError> {
    let picked: Vec<&Annotation> = match &cfg.annotator_aggregation {
        Aggregation::MeanAcrossAnnotators => annotations.to_vec(),
        Aggregation::PerAnnotator(id) => annotations.iter().copied().filter(|a| &a.annotator_id == id).collect(),
    };
    if picked.is_empty() {
        return Err(ScoringError::NoAnnotations);
    }
    Ok(picked)
}

fn mean(values: impl ExactSizeIterator<Item = Score>) -> Score {
    let n = values.len() as i64;
    values.sum::<Score>() / Score::from_integer(n)
}

/// SEGS for one (segment, system) pair from the authoritative annotations of
/// all its annotators.
pub fn segs_aggregated(annotations: &[&Annotation], cfg: &ScoringConfig) -> Result<Score, ScoringError> {
    let picked = selected(annotations, cfg)?;
    let values = picked.iter().map(|a| segs(a, cfg)).collect::<Result<Vec<_>, _>>()?;
    Ok(mean(values.into_iter()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Bucket {
    NoEdit,
    Minor,
    Major,
}

impl Bucket {
    pub const ALL: [Bucket; 3] = [Bucket::NoEdit, Bucket::Minor, Bucket::Major];

    pub fn ordinal(self) -> u8 {
        self as u8
    }

    pub fn label(self) -> &'static str {
        match self {
            Bucket::NoEdit => "No edit",
            Bucket::Minor => "Minor",
            Bucket::Major => "Major",
        }
    }
}

/// NoEdit iff 0, Minor on (0, minor_upper], Major above. `segs` must be
/// non-negative.
pub fn bucket(segs: Score, cfg: &ScoringConfig) -> Bucket {
    debug_assert!(segs >= Score::from_integer(0), "negative SEGS {segs}");
    if segs <= Score::from_integer(0) {
        Bucket::NoEdit
    } else if segs <= cfg.minor_upper {
        Bucket::Minor
    } else {
        Bucket::Major
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreBasis {
    PerAnnotator(AnnotatorId),
    MeanAcrossAnnotators,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentScore {
    pub segment_id: SegmentId,
    pub system_id: SystemId,
    #[serde(with = "crate::model::ratio_str")]
    pub segs: Score,
    pub bucket: Bucket,
    pub basis: ScoreBasis,
}

/// Authoritative annotations of one system grouped per segment, in corpus
/// order. Segments with nothing to aggregate are reported as missing.
fn grouped<'p>(
    project: &'p Project,
    system: &SystemId,
    cfg: &ScoringConfig,
) -> Result<Vec<(SegmentId, Vec<&'p Annotation>)>, ScoringError> {
    if !project.systems().contains(system) {
        return Err(ScoringError::UnknownSystem(system.clone()));
    }
    let auth = project.authoritative_annotations()?;
    let mut by_segment: BTreeMap<&SegmentId, Vec<&Annotation>> = BTreeMap::new();
    for a in auth.values().filter(|a| &a.system_id == system) {
        by_segment.entry(&a.segment_id).or_default().push(a);
    }
    let mut out = Vec::new();
    let mut missing = Vec::new();
    for seg in &project.segments {
        let anns = by_segment.remove(&seg.id).unwrap_or_default();
        match selected(&anns, cfg) {
            Ok(picked) => out.push((seg.id.clone(), picked)),
            Err(_) => missing.push(seg.id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(ScoringError::MissingAnnotations {
            system_id: system.clone(),
            segments: missing,
        });
    }
    Ok(out)
}

/// Aggregated SEGS and bucket for every segment of one system.
pub fn segment_scores(
    project: &Project,
    system: &SystemId,
    cfg: &ScoringConfig,
) -> Result<Vec<SegmentScore>, ScoringError> {
    let basis = match &cfg.annotator_aggregation {
        Aggregation::PerAnnotator(id) => ScoreBasis::PerAnnotator(id.clone()),
        Aggregation::MeanAcrossAnnotators => ScoreBasis::MeanAcrossAnnotators,
    };
    grouped(project, system, cfg)?
        .into_iter()
        .map(|(segment_id, anns)| {
            let s = segs_aggregated(&anns, cfg)?;
            Ok(SegmentScore {
                segment_id,
                system_id: system.clone(),
                segs: s,
                bucket: bucket(s, cfg),
                basis: basis.clone(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeverityDistribution {
    pub system_id: SystemId,
    pub no_edit: usize,
    pub minor: usize,
    pub major: usize,
    pub total_segments: usize,
}

impl SeverityDistribution {
    pub fn from_counts(system_id: impl Into<SystemId>, no_edit: usize, minor: usize, major: usize) -> Self {
        Self {
            system_id: system_id.into(),
            no_edit,
            minor,
            major,
            total_segments: no_edit + minor + major,
        }
    }

    pub fn count(&self, b: Bucket) -> usize {
        match b {
            Bucket::NoEdit => self.no_edit,
            Bucket::Minor => self.minor,
            Bucket::Major => self.major,
        }
    }

    /// Exact share of a bucket in percent; `None` for an empty distribution.
    pub fn percentage(&self, b: Bucket) -> Option<Score> {
        (self.total_segments > 0).then(|| Score::new(self.count(b) as i64 * 100, self.total_segments as i64))
    }
}

pub fn severity_distribution(
    project: &Project,
    system: &SystemId,
    cfg: &ScoringConfig,
) -> Result<SeverityDistribution, ScoringError> {
    let scores = segment_scores(project, system, cfg)?;
    let count = |b| scores.iter().filter(|s| s.bucket == b).count();
    Ok(SeverityDistribution::from_counts(
        system.clone(),
        count(Bucket::NoEdit),
        count(Bucket::Minor),
        count(Bucket::Major),
    ))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryTotals {
    pub system_id: SystemId,
    /// ADP already multiplied by the ADP weight.
    pub per_category: BTreeMap<ErrorCategory, Score>,
    pub grand_total: Score,
}

impl CategoryTotals {
    /// Builds totals from per-category values; missing categories are 0.
    pub fn from_parts(system_id: impl Into<SystemId>, parts: impl IntoIterator<Item = (ErrorCategory, Score)>) -> Self {
        let mut per_category: BTreeMap<ErrorCategory, Score> = ErrorCategory::ALL
            .into_iter()
            .map(|c| (c, Score::from_integer(0)))
            .collect();
        for (c, v) in parts {
            per_category.insert(c, v);
        }
        let grand_total = per_category.values().copied().sum();
        Self {
            system_id: system_id.into(),
            per_category,
            grand_total,
        }
    }

    pub fn get(&self, c: ErrorCategory) -> Score {
        self.per_category.get(&c).copied().unwrap_or_default()
    }

    pub fn group_total(&self, g: ErrorGroup) -> Score {
        ErrorCategory::ALL
            .into_iter()
            .filter(|c| c.group() == g)
            .map(|c| self.get(c))
            .sum()
    }
}

/// Per-category accumulated scores. Each segment contributes the
/// annotator-aggregated severity per category, so the grand total equals the
/// sum of aggregated SEGS; that equality is checked before returning.
pub fn category_totals(
    project: &Project,
    system: &SystemId,
    cfg: &ScoringConfig,
) -> Result<CategoryTotals, ScoringError> {
    let groups = grouped(project, system, cfg)?;
    let mut parts: BTreeMap<ErrorCategory, Score> = BTreeMap::new();
    let mut segs_sum = Score::from_integer(0);
    for (_, anns) in &groups {
        for &c in &ErrorCategory::ALL {
            let v = mean(anns.iter().map(|a| weighted(a, c, cfg)));
            *parts.entry(c).or_default() += v;
        }
        segs_sum += segs_aggregated(anns, cfg)?;
    }
    let totals = CategoryTotals::from_parts(system.clone(), parts);
    if totals.grand_total != segs_sum {
        return Err(ScoringError::Inconsistent {
            totals: totals.grand_total,
            segs: segs_sum,
        });
    }
    Ok(totals)
}
