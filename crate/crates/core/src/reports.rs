//! Report suite: per-segment scores, severity distribution, error pattern
//! (accumulated category totals) and agreement.
//!
//! Every report is a pure function of (project, config) and renders three
//! ways from the same cell strings: aligned text tables, comma-separated
//! values and a JSON document tagged with a schema name and version.
//! Precision: kappa 3 decimals, scores 2 decimals, percentages integers
//! (half-up).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::agreement::{agreement_table, AgreementError, AgreementTable, Dimension, Kappa};
use crate::decimal::{fixed, round_half_up};
use crate::model::{ErrorCategory, ErrorGroup, Project, Score, ScoringConfig, SegmentId, SystemId};
use crate::scoring::{
    category_totals, segment_scores, severity_distribution, Bucket, CategoryTotals, ScoringError, SeverityDistribution,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const UNDEFINED_KAPPA: &str = "n/a (degenerate)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReportKind {
    Scores,
    Severity,
    Pattern,
    Agreement,
}

impl ReportKind {
    pub const ALL: [ReportKind; 4] = [
        ReportKind::Scores,
        ReportKind::Severity,
        ReportKind::Pattern,
        ReportKind::Agreement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReportKind::Scores => "scores",
            ReportKind::Severity => "severity",
            ReportKind::Pattern => "pattern",
            ReportKind::Agreement => "agreement",
        }
    }
}

impl FromStr for ReportKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ReportKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown report kind `{s}` (scores, severity, pattern, agreement)"))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum OutputFormat {
    #[default]
    Text,
    Delimited,
    Structured,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(OutputFormat::Text),
            "delimited" | "csv" => Ok(OutputFormat::Delimited),
            "structured" | "json" => Ok(OutputFormat::Structured),
            other => Err(format!("unknown format `{other}` (text, delimited, structured)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Agreement(#[from] AgreementError),
}

impl ReportError {
    /// Short machine-readable error name.
    pub fn kind(&self) -> &'static str {
        match self {
            ReportError::Scoring(ScoringError::MissingAnnotations { .. }) => "MissingAnnotations",
            ReportError::Scoring(ScoringError::UnknownSystem(_)) => "UnknownSystem",
            ReportError::Scoring(_) => "ScoringError",
            ReportError::Agreement(AgreementError::NeedExactlyTwoAnnotators(_)) => "NeedExactlyTwoAnnotators",
            ReportError::Agreement(AgreementError::NoSharedItems(_)) => "NoSharedItems",
            ReportError::Agreement(_) => "AgreementError",
        }
    }

    /// Structured context, e.g. the uncovered segments.
    pub fn details(&self) -> serde_json::Value {
        match self {
            ReportError::Scoring(ScoringError::MissingAnnotations { system_id, segments }) => {
                serde_json::json!({ "system_id": system_id, "segments": segments })
            }
            ReportError::Agreement(AgreementError::NeedExactlyTwoAnnotators(found)) => {
                serde_json::json!({ "annotators": found })
            }
            ReportError::Agreement(AgreementError::NoSharedItems(system)) => {
                serde_json::json!({ "system_id": system })
            }
            _ => serde_json::Value::Null,
        }
    }
}

/// Plain table of display strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Table {
    pub title: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(title: impl Into<String>, headers: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            title: title.into(),
            headers: headers.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    /// First column left-aligned, the rest right-aligned.
    pub fn to_text(&self) -> String {
        let width = |s: &str| s.chars().count();
        let mut widths: Vec<usize> = self.headers.iter().map(|h| width(h)).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(width(cell));
            }
        }
        let line = |cells: &[String]| {
            let mut s = String::new();
            for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
                let pad = " ".repeat(w - width(cell));
                if i > 0 {
                    s.push_str("  ");
                }
                if i == 0 {
                    s.push_str(cell);
                    s.push_str(&pad);
                } else {
                    s.push_str(&pad);
                    s.push_str(cell);
                }
            }
            s.trim_end().to_owned()
        };
        let mut out = String::new();
        if !self.title.is_empty() {
            writeln!(out, "{}", self.title).unwrap();
        }
        writeln!(out, "{}", line(&self.headers)).unwrap();
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        writeln!(out, "{}", line(&rule)).unwrap();
        for row in &self.rows {
            writeln!(out, "{}", line(row)).unwrap();
        }
        out
    }

    fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

/// Shared rendering of a report.
pub trait Report: Serialize + Sized {
    fn kind(&self) -> ReportKind;
    fn title(&self) -> String;
    fn tables(&self) -> Vec<Table>;
    fn notes(&self) -> &[String];

    /// Tables used for the delimited rendering.
    fn delimited_tables(&self) -> Vec<Table> {
        self.tables()
    }

    fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.title());
        for t in self.tables() {
            out.push('\n');
            out.push_str(&t.to_text());
        }
        if !self.notes().is_empty() {
            out.push('\n');
            for n in self.notes() {
                writeln!(out, "note: {n}").unwrap();
            }
        }
        out
    }

    fn to_delimited(&self) -> String {
        let tables = self.delimited_tables();
        let mut out = String::new();
        for (i, t) in tables.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            if tables.len() > 1 {
                writeln!(out, "# {}", t.title).unwrap();
            }
            out.push_str(&t.to_csv());
        }
        for n in self.notes() {
            writeln!(out, "# note: {n}").unwrap();
        }
        out
    }

    fn to_structured(&self) -> String {
        #[derive(Serialize)]
        struct Envelope<'a, R: ?Sized> {
            schema: String,
            schema_version: u32,
            report: &'a R,
        }
        let doc = Envelope {
            schema: format!("mtqe.report.{}", self.kind().name()),
            schema_version: SCHEMA_VERSION,
            report: self,
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
        s.push('\n');
        s
    }

    fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Text => self.to_text(),
            OutputFormat::Delimited => self.to_delimited(),
            OutputFormat::Structured => self.to_structured(),
        }
    }
}

fn percent(part: Score, whole: Score) -> Option<i64> {
    (whole != Score::from_integer(0)).then(|| round_half_up(part * Score::from_integer(100) / whole))
}

fn opt_cell(v: Option<i64>) -> String {
    v.map_or_else(|| "-".to_owned(), |x| x.to_string())
}

// ---------------------------------------------------------------------------
// scores

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScoreRow {
    pub segment_id: SegmentId,
    pub system_id: SystemId,
    pub segs: String,
    pub segs_exact: String,
    pub bucket: Bucket,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScoresReport {
    pub adp_weight: String,
    pub basis: String,
    pub rows: Vec<ScoreRow>,
    pub max_segs: Option<String>,
    pub notes: Vec<String>,
}

pub fn scores_report(project: &Project, cfg: &ScoringConfig) -> Result<ScoresReport, ReportError> {
    let mut rows = Vec::new();
    let mut max: Option<Score> = None;
    for system in project.systems() {
        for s in segment_scores(project, &system, cfg)? {
            max = Some(max.map_or(s.segs, |m| m.max(s.segs)));
            rows.push(ScoreRow {
                segment_id: s.segment_id,
                system_id: s.system_id,
                segs: fixed(s.segs, 2),
                segs_exact: s.segs.to_string(),
                bucket: s.bucket,
            });
        }
    }
    let basis = match &cfg.annotator_aggregation {
        crate::model::Aggregation::PerAnnotator(a) => format!("annotator {a}"),
        crate::model::Aggregation::MeanAcrossAnnotators => "mean across annotators".to_owned(),
    };
    let mut notes = Vec::new();
    if let Some(m) = max {
        notes.push(format!("highest SEGS observed: {}", fixed(m, 2)));
    }
    Ok(ScoresReport {
        adp_weight: cfg.adp_weight.to_string(),
        basis,
        rows,
        max_segs: max.map(|m| fixed(m, 2)),
        notes,
    })
}

impl Report for ScoresReport {
    fn kind(&self) -> ReportKind {
        ReportKind::Scores
    }

    fn title(&self) -> String {
        format!("Segment error scores (ADP weight {}, {})", self.adp_weight, self.basis)
    }

    fn tables(&self) -> Vec<Table> {
        let mut t = Table::new("", ["Segment", "System", "SEGS", "Bucket"]);
        for r in &self.rows {
            t.rows.push(vec![
                r.segment_id.to_string(),
                r.system_id.to_string(),
                r.segs.clone(),
                r.bucket.label().to_owned(),
            ]);
        }
        vec![t]
    }

    fn notes(&self) -> &[String] {
        &self.notes
    }
}

// ---------------------------------------------------------------------------
// severity distribution

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BucketCell {
    pub count: usize,
    pub percent: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeverityRow {
    pub system_id: SystemId,
    pub segments: usize,
    pub no_edit: BucketCell,
    pub minor: BucketCell,
    pub major: BucketCell,
    pub percent_sum: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeverityReport {
    pub minor_upper: String,
    pub rows: Vec<SeverityRow>,
    pub notes: Vec<String>,
}

impl SeverityReport {
    pub fn from_distributions(distributions: &[SeverityDistribution], cfg: &ScoringConfig) -> Self {
        let mut notes = Vec::new();
        let rows = distributions
            .iter()
            .map(|d| {
                let cell = |b: Bucket| BucketCell {
                    count: d.count(b),
                    percent: d.percentage(b).map(round_half_up),
                };
                let (no_edit, minor, major) = (cell(Bucket::NoEdit), cell(Bucket::Minor), cell(Bucket::Major));
                let percent_sum = no_edit
                    .percent
                    .zip(minor.percent)
                    .zip(major.percent)
                    .map(|((a, b), c)| a + b + c);
                if let Some(sum) = percent_sum.filter(|&s| s != 100) {
                    notes.push(format!("percentages for {} sum to {sum} after rounding", d.system_id));
                }
                SeverityRow {
                    system_id: d.system_id.clone(),
                    segments: d.total_segments,
                    no_edit,
                    minor,
                    major,
                    percent_sum,
                }
            })
            .collect();
        Self {
            minor_upper: fixed(cfg.minor_upper, 2),
            rows,
            notes,
        }
    }
}

pub fn severity_report(project: &Project, cfg: &ScoringConfig) -> Result<SeverityReport, ReportError> {
    let dists = project
        .systems()
        .iter()
        .map(|s| severity_distribution(project, s, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SeverityReport::from_distributions(&dists, cfg))
}

impl Report for SeverityReport {
    fn kind(&self) -> ReportKind {
        ReportKind::Severity
    }

    fn title(&self) -> String {
        format!(
            "Severity distribution (no edit: SEGS = 0, minor: 0 < SEGS <= {}, major: SEGS > {})",
            self.minor_upper, self.minor_upper
        )
    }

    fn tables(&self) -> Vec<Table> {
        let mut t = Table::new(
            "",
            [
                "System",
                "Segments",
                "No edit",
                "No edit %",
                "Minor",
                "Minor %",
                "Major",
                "Major %",
            ],
        );
        for r in &self.rows {
            let mut row = vec![r.system_id.to_string(), r.segments.to_string()];
            for c in [&r.no_edit, &r.minor, &r.major] {
                row.push(c.count.to_string());
                row.push(opt_cell(c.percent));
            }
            t.rows.push(row);
        }
        vec![t]
    }

    fn notes(&self) -> &[String] {
        &self.notes
    }
}

// ---------------------------------------------------------------------------
// error pattern

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScoreCell {
    pub total: String,
    pub exact: String,
    pub share_percent: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PatternRow {
    pub system_id: SystemId,
    pub categories: BTreeMap<ErrorCategory, ScoreCell>,
    pub groups: BTreeMap<ErrorGroup, ScoreCell>,
    pub grand_total: String,
    pub grand_total_exact: String,
    /// Share of TRM and GSMIS together.
    pub trm_gsmis_share_percent: Option<i64>,
    pub category_share_sum: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PatternReport {
    pub adp_weight: String,
    pub rows: Vec<PatternRow>,
    pub notes: Vec<String>,
}

impl PatternReport {
    pub fn from_totals(totals: &[CategoryTotals], cfg: &ScoringConfig) -> Self {
        let mut notes = Vec::new();
        let rows = totals
            .iter()
            .map(|t| {
                let cell = |v: Score| ScoreCell {
                    total: fixed(v, 2),
                    exact: v.to_string(),
                    share_percent: percent(v, t.grand_total),
                };
                let categories: BTreeMap<_, _> = ErrorCategory::ALL.into_iter().map(|c| (c, cell(t.get(c)))).collect();
                let groups = ErrorGroup::ALL
                    .into_iter()
                    .map(|g| (g, cell(t.group_total(g))))
                    .collect();
                let shares: Option<Vec<i64>> = categories.values().map(|c| c.share_percent).collect();
                let category_share_sum = shares.map(|v| v.iter().sum());
                if let Some(sum) = category_share_sum.filter(|&s| s != 100) {
                    notes.push(format!(
                        "category shares for {} sum to {sum} after rounding",
                        t.system_id
                    ));
                }
                PatternRow {
                    system_id: t.system_id.clone(),
                    categories,
                    groups,
                    grand_total: fixed(t.grand_total, 2),
                    grand_total_exact: t.grand_total.to_string(),
                    trm_gsmis_share_percent: percent(
                        t.get(ErrorCategory::Trm) + t.get(ErrorCategory::Gsmis),
                        t.grand_total,
                    ),
                    category_share_sum,
                }
            })
            .collect();
        Self {
            adp_weight: cfg.adp_weight.to_string(),
            rows,
            notes,
        }
    }
}

pub fn pattern_report(project: &Project, cfg: &ScoringConfig) -> Result<PatternReport, ReportError> {
    let totals = project
        .systems()
        .iter()
        .map(|s| category_totals(project, s, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PatternReport::from_totals(&totals, cfg))
}

impl Report for PatternReport {
    fn kind(&self) -> ReportKind {
        ReportKind::Pattern
    }

    fn title(&self) -> String {
        "Error pattern (accumulated error scores)".to_owned()
    }

    fn tables(&self) -> Vec<Table> {
        let adp = format!("ADP x{}", self.adp_weight);
        let mut by_cat = Table::new(
            "Accumulated scores by category",
            ["System", "FLU", "PRN", "TRM", "GSMIS", adp.as_str(), "Total"],
        );
        let mut by_group = Table::new(
            "Accumulated scores by group",
            ["System", "Fluency", "Meaning Transfer", "Adaptation", "Total"],
        );
        let mut shares = Table::new(
            "Share of total (%)",
            ["System", "FLU", "PRN", "TRM", "GSMIS", "ADP", "TRM+GSMIS"],
        );
        for r in &self.rows {
            let sys = r.system_id.to_string();
            let mut row = vec![sys.clone()];
            row.extend(r.categories.values().map(|c| c.total.clone()));
            row.push(r.grand_total.clone());
            by_cat.rows.push(row);

            let mut row = vec![sys.clone()];
            row.extend(r.groups.values().map(|c| c.total.clone()));
            row.push(r.grand_total.clone());
            by_group.rows.push(row);

            let mut row = vec![sys];
            row.extend(r.categories.values().map(|c| opt_cell(c.share_percent)));
            row.push(opt_cell(r.trm_gsmis_share_percent));
            shares.rows.push(row);
        }
        vec![by_cat, by_group, shares]
    }

    fn notes(&self) -> &[String] {
        &self.notes
    }
}

// ---------------------------------------------------------------------------
// agreement

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaCell {
    pub system_id: SystemId,
    pub kappa: Option<String>,
    pub kappa_raw: Kappa,
    pub band: Option<String>,
    pub items: usize,
}

impl KappaCell {
    fn display(&self) -> String {
        match (&self.kappa, &self.band) {
            (Some(k), Some(b)) => format!("{k} ({b})"),
            _ => UNDEFINED_KAPPA.to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReportRow {
    pub dimension: Dimension,
    pub label: String,
    pub cells: Vec<KappaCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub systems: Vec<SystemId>,
    pub rows: Vec<AgreementReportRow>,
    pub excluded_items: usize,
    pub notes: Vec<String>,
}

impl AgreementReport {
    pub fn from_table(table: &AgreementTable) -> Self {
        let rows = Dimension::ALL
            .into_iter()
            .map(|dim| AgreementReportRow {
                dimension: dim,
                label: dim.label().to_owned(),
                cells: table
                    .systems
                    .iter()
                    .map(|s| {
                        let row = table.row(dim, s);
                        let kappa = row.map_or(Kappa::Undefined, |r| r.kappa);
                        KappaCell {
                            system_id: s.clone(),
                            kappa: kappa.value().map(|v| format!("{v:.3}")),
                            kappa_raw: kappa,
                            band: kappa.band().map(|b| b.label().to_owned()),
                            items: row.map_or(0, |r| r.items),
                        }
                    })
                    .collect(),
            })
            .collect();
        let mut notes = Vec::new();
        if !table.annotators.is_empty() {
            let names: Vec<&str> = table.annotators.iter().map(|a| a.as_str()).collect();
            notes.push(format!("annotators: {}", names.join(", ")));
        }
        if !table.excluded.is_empty() {
            notes.push(format!(
                "{} item(s) excluded for missing annotations",
                table.excluded.len()
            ));
        }
        Self {
            systems: table.systems.clone(),
            rows,
            excluded_items: table.excluded.len(),
            notes,
        }
    }
}

pub fn agreement_report(project: &Project, cfg: &ScoringConfig) -> Result<AgreementReport, ReportError> {
    Ok(AgreementReport::from_table(&agreement_table(project, cfg)?))
}

impl Report for AgreementReport {
    fn kind(&self) -> ReportKind {
        ReportKind::Agreement
    }

    fn title(&self) -> String {
        "Inter-annotator agreement (quadratic weighted kappa)".to_owned()
    }

    fn tables(&self) -> Vec<Table> {
        let mut headers = vec!["Error Type".to_owned()];
        headers.extend(self.systems.iter().map(|s| s.to_string()));
        let mut t = Table::new("", headers);
        for r in &self.rows {
            let mut row = vec![r.label.clone()];
            row.extend(r.cells.iter().map(KappaCell::display));
            t.rows.push(row);
        }
        vec![t]
    }

    fn delimited_tables(&self) -> Vec<Table> {
        let mut t = Table::new("", ["Error Type", "System", "Kappa", "Band", "Items"]);
        for r in &self.rows {
            for c in &r.cells {
                t.rows.push(vec![
                    r.label.clone(),
                    c.system_id.to_string(),
                    c.kappa.clone().unwrap_or_else(|| UNDEFINED_KAPPA.to_owned()),
                    c.band.clone().unwrap_or_default(),
                    c.items.to_string(),
                ]);
            }
        }
        vec![t]
    }

    fn notes(&self) -> &[String] {
        &self.notes
    }
}

/// Builds and renders one report kind.
pub fn render_report(
    project: &Project,
    cfg: &ScoringConfig,
    kind: ReportKind,
    format: OutputFormat,
) -> Result<String, ReportError> {
    Ok(match kind {
        ReportKind::Scores => scores_report(project, cfg)?.render(format),
        ReportKind::Severity => severity_report(project, cfg)?.render(format),
        ReportKind::Pattern => pattern_report(project, cfg)?.render(format),
        ReportKind::Agreement => agreement_report(project, cfg)?.render(format),
    })
}
