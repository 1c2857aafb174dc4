//! Inter-annotator agreement with quadratic weighted Cohen's kappa.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    Annotation, AnnotatorId, ErrorCategory, MeaningTransferRule, ModelError, Project, ScoringConfig, SegmentId,
    SystemId,
};
use crate::scoring::{bucket, raw_segs};

/// Ordinal levels on the severity scale.
pub const SEVERITY_LEVELS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgreementError {
    #[error("rating lists differ in length ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },
    #[error("level {level} at position {position} is outside 0..{k}")]
    LevelOutOfRange { position: usize, level: usize, k: usize },
    #[error("a confusion matrix needs at least 2 levels, got {0}")]
    TooFewLevels(usize),
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("agreement needs exactly two annotators, found {}", .0.len())]
    NeedExactlyTwoAnnotators(Vec<AnnotatorId>),
    #[error("annotators share no items for system `{0}`")]
    NoSharedItems(SystemId),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Rows are annotator A's level, columns annotator B's.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<Vec<u64>>,
    n: u64,
}

impl ConfusionMatrix {
    pub fn from_ratings(a: &[usize], b: &[usize], k: usize) -> Result<Self, AgreementError> {
        if k < 2 {
            return Err(AgreementError::TooFewLevels(k));
        }
        if a.len() != b.len() {
            return Err(AgreementError::LengthMismatch { a: a.len(), b: b.len() });
        }
        let mut counts = vec![vec![0u64; k]; k];
        for (position, (&i, &j)) in a.iter().zip(b).enumerate() {
            for level in [i, j] {
                if level >= k {
                    return Err(AgreementError::LevelOutOfRange { position, level, k });
                }
            }
            counts[i][j] += 1;
        }
        Ok(Self {
            k,
            counts,
            n: a.len() as u64,
        })
    }

    /// Builds a matrix from explicit counts; rows must form a k x k square.
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self, AgreementError> {
        let k = counts.len();
        if k < 2 {
            return Err(AgreementError::TooFewLevels(k));
        }
        if let Some(row) = counts.iter().find(|r| r.len() != k) {
            return Err(AgreementError::LengthMismatch { a: k, b: row.len() });
        }
        let n = counts.iter().flatten().sum();
        Ok(Self { k, counts, n })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn count(&self, i: usize, j: usize) -> u64 {
        self.counts[i][j]
    }

    pub fn transpose(&self) -> Self {
        let counts = (0..self.k)
            .map(|j| (0..self.k).map(|i| self.counts[i][j]).collect())
            .collect();
        Self {
            k: self.k,
            counts,
            n: self.n,
        }
    }

    /// Quadratic weighted kappa.
    ///
    /// With weights (i-j)^2 the (k-1)^2 normaliser and the 1/n, 1/n^2 factors
    /// cancel, leaving `1 - n * sum(w * count) / sum(w * row_i * col_j)` over
    /// integers. A zero expected disagreement means both raters used one and
    /// the same level, which counts as perfect agreement.
    #[allow(clippy::needless_range_loop)]
    pub fn qwk(&self) -> Result<Kappa, AgreementError> {
        if self.n == 0 {
            return Err(AgreementError::EmptyMatrix);
        }
        let k = self.k;
        let rows: Vec<u128> = (0..k)
            .map(|i| self.counts[i].iter().map(|&c| c as u128).sum())
            .collect();
        let cols: Vec<u128> = (0..k)
            .map(|j| (0..k).map(|i| self.counts[i][j] as u128).sum())
            .collect();
        let mut observed: u128 = 0;
        let mut expected: u128 = 0;
        for i in 0..k {
            for j in 0..k {
                let w = (i.abs_diff(j) as u128).pow(2);
                observed += w * self.counts[i][j] as u128;
                expected += w * rows[i] * cols[j];
            }
        }
        Ok(match (observed, expected) {
            (0, 0) => Kappa::Value(1.0),
            (_, 0) => Kappa::Undefined,
            (o, e) => Kappa::Value(1.0 - (self.n as u128 * o) as f64 / e as f64),
        })
    }
}

/// Kappa value, or `Undefined` when chance disagreement vanishes while
/// observed disagreement does not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "Option<f64>", into = "Option<f64>")]
pub enum Kappa {
    Value(f64),
    Undefined,
}

impl Kappa {
    pub fn value(self) -> Option<f64> {
        match self {
            Kappa::Value(v) => Some(v),
            Kappa::Undefined => None,
        }
    }

    pub fn band(self) -> Option<Band> {
        self.value().map(band)
    }
}

impl From<Option<f64>> for Kappa {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Kappa::Undefined, Kappa::Value)
    }
}

impl From<Kappa> for Option<f64> {
    fn from(k: Kappa) -> Self {
        k.value()
    }
}

/// Conventional kappa interpretation bands, each inclusive at its upper end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Band {
    Poor,
    Slight,
    Fair,
    Moderate,
    Substantial,
    AlmostPerfect,
}

impl Band {
    pub fn label(self) -> &'static str {
        match self {
            Band::Poor => "Poor",
            Band::Slight => "Slight",
            Band::Fair => "Fair",
            Band::Moderate => "Moderate",
            Band::Substantial => "Substantial",
            Band::AlmostPerfect => "Almost Perfect",
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub fn band(kappa: f64) -> Band {
    if kappa < 0.0 {
        Band::Poor
    } else if kappa <= 0.20 {
        Band::Slight
    } else if kappa <= 0.40 {
        Band::Fair
    } else if kappa <= 0.60 {
        Band::Moderate
    } else if kappa <= 0.80 {
        Band::Substantial
    } else {
        Band::AlmostPerfect
    }
}

/// One ordinal level for the three meaning-transfer subcategories.
pub fn meaning_transfer_level(a: &Annotation, rule: MeaningTransferRule) -> u8 {
    let levels = ErrorCategory::MEANING_TRANSFER.map(|c| a.severity(c).level());
    match rule {
        MeaningTransferRule::Max => levels.into_iter().max().unwrap_or(0),
        MeaningTransferRule::CappedSum => levels.into_iter().sum::<u8>().min(2),
    }
}

/// SEGS bucket as an ordinal: NoEdit 0, Minor 1, Major 2.
pub fn overall_level(a: &Annotation, cfg: &ScoringConfig) -> u8 {
    bucket(raw_segs(a, cfg), cfg).ordinal()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dimension {
    Fluency,
    MeaningTransfer,
    Adaptation,
    Overall,
}

impl Dimension {
    pub const ALL: [Dimension; 4] = [
        Dimension::Fluency,
        Dimension::MeaningTransfer,
        Dimension::Adaptation,
        Dimension::Overall,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Dimension::Fluency => "Fluency",
            Dimension::MeaningTransfer => "Meaning Transfer",
            Dimension::Adaptation => "Adaptation",
            Dimension::Overall => "Overall",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementRow {
    pub dimension: Dimension,
    pub system_id: SystemId,
    pub kappa: Kappa,
    pub band: Option<Band>,
    /// Paired items the kappa was computed over.
    pub items: usize,
}

impl AgreementRow {
    pub fn new(dimension: Dimension, system_id: SystemId, kappa: Kappa, items: usize) -> Self {
        Self {
            dimension,
            system_id,
            kappa,
            band: kappa.band(),
            items,
        }
    }
}

/// An item at least one of the two annotators has not judged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcludedItem {
    pub system_id: SystemId,
    pub segment_id: SegmentId,
    pub missing: Vec<AnnotatorId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementTable {
    pub annotators: Vec<AnnotatorId>,
    pub systems: Vec<SystemId>,
    pub rows: Vec<AgreementRow>,
    pub excluded: Vec<ExcludedItem>,
}

impl AgreementTable {
    pub fn row(&self, dimension: Dimension, system: &SystemId) -> Option<&AgreementRow> {
        self.rows
            .iter()
            .find(|r| r.dimension == dimension && &r.system_id == system)
    }
}

fn kappa_of(a: &[usize], b: &[usize]) -> Result<Kappa, AgreementError> {
    if a.is_empty() {
        return Ok(Kappa::Undefined);
    }
    ConfusionMatrix::from_ratings(a, b, SEVERITY_LEVELS)?.qwk()
}

/// Per-system kappas for fluency, meaning transfer, adaptation and the
/// overall SEGS bucket. Adaptation only counts items both annotators could
/// assess.
pub fn agreement_table(project: &Project, cfg: &ScoringConfig) -> Result<AgreementTable, AgreementError> {
    let auth = project.authoritative_annotations()?;
    let mut annotators: Vec<AnnotatorId> = project
        .annotators
        .iter()
        .filter(|id| auth.keys().any(|k| &k.annotator_id == *id))
        .cloned()
        .collect();
    for k in auth.keys() {
        if !annotators.contains(&k.annotator_id) {
            annotators.push(k.annotator_id.clone());
        }
    }
    let [first, second] =
        <[AnnotatorId; 2]>::try_from(annotators.clone()).map_err(AgreementError::NeedExactlyTwoAnnotators)?;

    let lookup: BTreeMap<(&AnnotatorId, &SegmentId, &SystemId), &Annotation> = auth
        .values()
        .map(|a| ((&a.annotator_id, &a.segment_id, &a.system_id), *a))
        .collect();

    let systems = project.systems();
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for system in &systems {
        let mut pairs = Vec::new();
        for seg in &project.segments {
            if project.output(&seg.id, system).is_none() {
                continue;
            }
            let a = lookup.get(&(&first, &seg.id, system));
            let b = lookup.get(&(&second, &seg.id, system));
            match (a, b) {
                (Some(a), Some(b)) => pairs.push((*a, *b)),
                _ => excluded.push(ExcludedItem {
                    system_id: system.clone(),
                    segment_id: seg.id.clone(),
                    missing: [(&first, a.is_none()), (&second, b.is_none())]
                        .into_iter()
                        .filter(|(_, m)| *m)
                        .map(|(id, _)| id.clone())
                        .collect(),
                }),
            }
        }
        if pairs.is_empty() {
            return Err(AgreementError::NoSharedItems(system.clone()));
        }

        for dim in Dimension::ALL {
            let (la, lb): (Vec<usize>, Vec<usize>) = pairs
                .iter()
                .filter(|(a, b)| dim != Dimension::Adaptation || (a.adp_applicable && b.adp_applicable))
                .map(|(a, b)| {
                    (
                        dimension_level(a, dim, cfg) as usize,
                        dimension_level(b, dim, cfg) as usize,
                    )
                })
                .unzip();
            rows.push(AgreementRow::new(dim, system.clone(), kappa_of(&la, &lb)?, la.len()));
        }
    }
    Ok(AgreementTable {
        annotators,
        systems,
        rows,
        excluded,
    })
}

fn dimension_level(a: &Annotation, dim: Dimension, cfg: &ScoringConfig) -> u8 {
    match dim {
        Dimension::Fluency => a.severity(ErrorCategory::Flu).level(),
        Dimension::MeaningTransfer => meaning_transfer_level(a, cfg.meaning_transfer),
        Dimension::Adaptation => a.severity(ErrorCategory::Adp).level(),
        Dimension::Overall => overall_level(a, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Severities, Severity};
    use ErrorCategory::*;

    fn kappa(a: &[usize], b: &[usize], k: usize) -> Kappa {
        ConfusionMatrix::from_ratings(a, b, k).unwrap().qwk().unwrap()
    }

    #[test]
    fn confusion_matrix_examples() {
        let m = ConfusionMatrix::from_ratings(&[0, 1], &[0, 1], 3).unwrap();
        assert_eq!((m.count(0, 0), m.count(1, 1), m.n()), (1, 1, 2));
        let m = ConfusionMatrix::from_ratings(&[2], &[0], 3).unwrap();
        assert_eq!(m.count(2, 0), 1);
        assert_eq!(
            ConfusionMatrix::from_ratings(&[0, 1], &[0], 3),
            Err(AgreementError::LengthMismatch { a: 2, b: 1 })
        );
        assert!(matches!(
            ConfusionMatrix::from_ratings(&[3], &[0], 3),
            Err(AgreementError::LevelOutOfRange { level: 3, .. })
        ));
    }

    #[test]
    fn perfect_agreement_over_three_levels() {
        assert_eq!(kappa(&[0, 1, 2], &[0, 1, 2], 3), Kappa::Value(1.0));
    }

    #[test]
    fn hand_computed_fixture() {
        // sum(wO) = 1/16, sum(wE) = 5/16 -> 1 - 1/5
        let Kappa::Value(v) = kappa(&[0, 0, 1, 2], &[0, 1, 1, 2], 3) else {
            panic!("undefined")
        };
        assert!((v - 0.8).abs() < 1e-12);
    }

    #[test]
    fn constant_identical_ratings_count_as_perfect() {
        assert_eq!(kappa(&[1; 10], &[1; 10], 3), Kappa::Value(1.0));
    }

    #[test]
    fn complete_disagreement_is_negative() {
        let Kappa::Value(v) = kappa(&[0, 2], &[2, 0], 3) else {
            panic!()
        };
        assert!(v < 0.0);
        assert_eq!(band(v), Band::Poor);
    }

    #[test]
    fn empty_matrix_is_an_error() {
        let m = ConfusionMatrix::from_ratings(&[], &[], 3).unwrap();
        assert_eq!(m.qwk(), Err(AgreementError::EmptyMatrix));
    }

    #[test]
    fn bands() {
        assert_eq!(band(0.500), Band::Moderate);
        assert_eq!(band(0.629), Band::Substantial);
        assert_eq!(band(1.0), Band::AlmostPerfect);
        assert_eq!(band(0.20), Band::Slight);
        assert_eq!(band(0.21), Band::Fair);
        assert_eq!(band(0.40), Band::Fair);
        assert_eq!(band(0.60), Band::Moderate);
        assert_eq!(band(0.80), Band::Substantial);
        assert_eq!(band(0.0), Band::Slight);
        assert_eq!(band(-0.01), Band::Poor);
    }

    fn ann(pairs: &[(ErrorCategory, Severity)]) -> Annotation {
        Annotation::new("a", "s", "x", pairs.iter().copied().collect::<Severities>())
    }

    #[test]
    fn meaning_transfer_levels() {
        let a = ann(&[(Trm, Severity::Major), (Gsmis, Severity::Minor)]);
        assert_eq!(meaning_transfer_level(&a, MeaningTransferRule::Max), 2);
        assert_eq!(meaning_transfer_level(&ann(&[]), MeaningTransferRule::Max), 0);
        assert_eq!(
            meaning_transfer_level(&ann(&[(Gsmis, Severity::Minor)]), MeaningTransferRule::Max),
            1
        );
        let two_minor = ann(&[(Prn, Severity::Minor), (Gsmis, Severity::Minor)]);
        assert_eq!(meaning_transfer_level(&two_minor, MeaningTransferRule::Max), 1);
        assert_eq!(meaning_transfer_level(&two_minor, MeaningTransferRule::CappedSum), 2);
    }

    #[test]
    fn overall_levels() {
        let cfg = ScoringConfig::default();
        assert_eq!(overall_level(&ann(&[]), &cfg), 0);
        assert_eq!(overall_level(&ann(&[(Adp, Severity::Major)]), &cfg), 1);
        assert_eq!(overall_level(&ann(&[(Trm, Severity::Major)]), &cfg), 2);
    }

    #[test]
    fn kappa_serializes_as_number_or_null() {
        assert_eq!(serde_json::to_string(&Kappa::Value(0.5)).unwrap(), "0.5");
        assert_eq!(serde_json::to_string(&Kappa::Undefined).unwrap(), "null");
    }
}
