//! Questionnaire sheets: one sheet per MT system and annotator.
//!
//! Layout: `DA, GOLD, MT, FLU, PRN, TRM, GSMIS, ADP, TOTAL`. Severity cells
//! hold 0, 1, 2 or nothing (read as 0). TOTAL is recomputed on import and
//! only compared against the stored value.

use std::collections::HashMap;
use std::io::Read;

use serde::Serialize;
use thiserror::Error;

use crate::decimal::fixed;
use crate::model::{
    join_violations, ratio_str, Annotation, AnnotationKey, AnnotatorId, ErrorCategory, ModelError, Project, Segment,
    SegmentId, Severities, Severity, SystemId, SystemOutput, Violation,
};
use crate::scoring::raw_segs;

pub const SHEET_HEADER: [&str; 9] = ["DA", "GOLD", "MT", "FLU", "PRN", "TRM", "GSMIS", "ADP", "TOTAL"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Error)]
#[serde(tag = "kind", content = "detail")]
pub enum SheetError {
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error("input is not valid UTF-8: {0}")]
    EncodingError(String),
    #[error("row {row}: bad severity `{value}` in column {column}")]
    BadSeverityCell { row: usize, column: String, value: String },
    #[error("row {row}: {}", join_violations(.violations))]
    GatingViolation { row: usize, violations: Vec<Violation> },
    #[error("row {row}: empty {column} text")]
    EmptyText { row: usize, column: String },
    #[error("row {row}: hypothesis differs from the stored output of segment `{segment_id}`")]
    HypothesisMismatch { row: usize, segment_id: SegmentId },
    #[error("row {row}: repeats the segment of row {first_row}")]
    DuplicateRow { row: usize, first_row: usize },
    #[error("row {row}: {message}")]
    Malformed { row: usize, message: String },
    #[error("unknown system `{0}`")]
    UnknownSystem(SystemId),
    #[error("unknown annotator `{0}`")]
    UnknownAnnotator(AnnotatorId),
    #[error("no annotations by `{annotator_id}` for system `{system_id}`")]
    NoAnnotations {
        system_id: SystemId,
        annotator_id: AnnotatorId,
    },
}

impl SheetError {
    pub fn row(&self) -> Option<usize> {
        match self {
            SheetError::BadSeverityCell { row, .. }
            | SheetError::GatingViolation { row, .. }
            | SheetError::EmptyText { row, .. }
            | SheetError::HypothesisMismatch { row, .. }
            | SheetError::DuplicateRow { row, .. }
            | SheetError::Malformed { row, .. } => Some(*row),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowRejection {
    pub row: usize,
    pub error: SheetError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowWarning {
    pub row: usize,
    pub message: String,
}

/// Result of reading a sheet against a project. Nothing is written until
/// [`ImportOutcome::commit`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ImportOutcome {
    pub system_id: SystemId,
    pub annotator_id: AnnotatorId,
    pub rows_read: usize,
    pub annotations: Vec<Annotation>,
    pub new_segments: Vec<Segment>,
    pub new_outputs: Vec<SystemOutput>,
    pub rejected: Vec<RowRejection>,
    pub warnings: Vec<RowWarning>,
}

impl ImportOutcome {
    /// Writes segments, outputs, the annotator and the annotations into
    /// `project`.
    pub fn commit(self, project: &mut Project) -> Result<(), ModelError> {
        project.add_annotator(self.annotator_id);
        for s in self.new_segments {
            project.add_segment(s)?;
        }
        for o in self.new_outputs {
            project.add_output(o)?;
        }
        for a in self.annotations {
            project.append_annotation(a)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Delimiter {
    #[default]
    Tab,
    Comma,
}

impl Delimiter {
    fn byte(self) -> u8 {
        match self {
            Delimiter::Tab => b'\t',
            Delimiter::Comma => b',',
        }
    }
}

struct Columns {
    da: usize,
    gold: usize,
    mt: usize,
    severities: [(ErrorCategory, usize); 5],
    total: Option<usize>,
}

fn locate_columns(header: &csv::StringRecord) -> Result<Columns, SheetError> {
    let mut pos: HashMap<String, usize> = HashMap::new();
    for (i, name) in header.iter().enumerate() {
        let name = name.trim().to_ascii_uppercase();
        if !SHEET_HEADER.contains(&name.as_str()) {
            return Err(SheetError::BadHeader(format!("unexpected column `{name}`")));
        }
        if pos.insert(name.clone(), i).is_some() {
            return Err(SheetError::BadHeader(format!("column `{name}` appears twice")));
        }
    }
    let get = |name: &str| {
        pos.get(name)
            .copied()
            .ok_or_else(|| SheetError::BadHeader(format!("missing column `{name}`")))
    };
    let mut severities = [(ErrorCategory::Flu, 0); 5];
    for (slot, c) in severities.iter_mut().zip(ErrorCategory::ALL) {
        *slot = (c, get(c.code())?);
    }
    Ok(Columns {
        da: get("DA")?,
        gold: get("GOLD")?,
        mt: get("MT")?,
        severities,
        total: pos.get("TOTAL").copied(),
    })
}

fn parse_severity(cell: &str) -> Option<Severity> {
    match cell.trim() {
        "" => Some(Severity::NoError),
        other => other.parse::<u8>().ok().and_then(|v| Severity::try_from(v).ok()),
    }
}

/// Reads a sheet for one (system, annotator) pair. Header and encoding
/// problems abort the import; row problems reject just that row. Rows are
/// numbered as in a spreadsheet, the header being row 1.
pub fn import_sheet(
    mut input: impl Read,
    system_id: SystemId,
    annotator_id: AnnotatorId,
    project: &Project,
) -> Result<ImportOutcome, SheetError> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| SheetError::EncodingError(e.to_string()))?;
    let text = super::decode_utf8(&bytes).map_err(|e| SheetError::EncodingError(e.to_string()))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(super::sniff_delimiter(text))
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| SheetError::BadHeader(e.to_string()))?
        .clone();
    if header.iter().all(|h| h.trim().is_empty()) {
        return Err(SheetError::BadHeader("empty header".into()));
    }
    let cols = locate_columns(&header)?;

    let mut out = ImportOutcome {
        system_id: system_id.clone(),
        annotator_id: annotator_id.clone(),
        rows_read: 0,
        annotations: Vec::new(),
        new_segments: Vec::new(),
        new_outputs: Vec::new(),
        rejected: Vec::new(),
        warnings: Vec::new(),
    };
    let mut next_seq = project.segments.len() + 1;
    let mut seen_rows: HashMap<SegmentId, usize> = HashMap::new();

    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        out.rows_read += 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                out.rejected.push(RowRejection {
                    row,
                    error: SheetError::Malformed {
                        row,
                        message: e.to_string(),
                    },
                });
                continue;
            }
        };
        match read_row(
            &record,
            row,
            &cols,
            &system_id,
            &annotator_id,
            project,
            &mut out,
            &mut next_seq,
            &mut seen_rows,
        ) {
            Ok(()) => {}
            Err(error) => out.rejected.push(RowRejection { row, error }),
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn read_row(
    record: &csv::StringRecord,
    row: usize,
    cols: &Columns,
    system_id: &SystemId,
    annotator_id: &AnnotatorId,
    project: &Project,
    out: &mut ImportOutcome,
    next_seq: &mut usize,
    seen_rows: &mut HashMap<SegmentId, usize>,
) -> Result<(), SheetError> {
    let cell = |i: usize| record.get(i).unwrap_or_default();
    let (da, gold, mt) = (cell(cols.da), cell(cols.gold), cell(cols.mt));
    for (name, text) in [("DA", da), ("GOLD", gold)] {
        if text.trim().is_empty() {
            return Err(SheetError::EmptyText {
                row,
                column: name.into(),
            });
        }
    }

    let mut severities = Severities::default();
    for (c, i) in cols.severities {
        let raw = cell(i);
        let s = parse_severity(raw).ok_or_else(|| SheetError::BadSeverityCell {
            row,
            column: c.code().into(),
            value: raw.into(),
        })?;
        severities.set(c, s);
    }

    // resolve or create the segment and the system output
    let existing = project.segment_by_text(da, gold).or_else(|| {
        out.new_segments
            .iter()
            .find(|s| s.source_da == da && s.gold_msa == gold)
    });
    let segment_id = match existing {
        Some(s) => s.id.clone(),
        None => {
            let id = loop {
                let candidate = SegmentId::new(format!("seg-{:04}", *next_seq));
                *next_seq += 1;
                if project.segment(&candidate).is_none() {
                    break candidate;
                }
            };
            out.new_segments.push(Segment::new(id.clone(), da, gold));
            id
        }
    };
    if let Some(&first_row) = seen_rows.get(&segment_id) {
        return Err(SheetError::DuplicateRow { row, first_row });
    }
    let stored = project
        .output(&segment_id, system_id)
        .or_else(|| out.new_outputs.iter().find(|o| o.segment_id == segment_id));
    match stored {
        Some(o) if o.hypothesis != mt => {
            return Err(SheetError::HypothesisMismatch { row, segment_id });
        }
        Some(_) => {}
        None => out.new_outputs.push(SystemOutput {
            segment_id: segment_id.clone(),
            system_id: system_id.clone(),
            hypothesis: mt.into(),
        }),
    }

    let key = AnnotationKey {
        annotator_id: annotator_id.clone(),
        segment_id: segment_id.clone(),
        system_id: system_id.clone(),
    };
    let annotation = Annotation::new(annotator_id.clone(), segment_id.clone(), system_id.clone(), severities)
        .with_revision(project.current_revision(&key) + 1);
    let violations = annotation.gating_violations();
    if !violations.is_empty() {
        return Err(SheetError::GatingViolation { row, violations });
    }

    if let Some(i) = cols.total {
        let raw = cell(i).trim();
        if !raw.is_empty() {
            let computed = raw_segs(&annotation, &project.config);
            match ratio_str::parse(raw) {
                Ok(v) if v == computed => {}
                Ok(_) => out.warnings.push(RowWarning {
                    row,
                    message: format!("TOTAL `{raw}` differs from recomputed {}", fixed(computed, 2)),
                }),
                Err(_) => out.warnings.push(RowWarning {
                    row,
                    message: format!("TOTAL `{raw}` is not a number"),
                }),
            }
        }
    }

    seen_rows.insert(segment_id, row);
    out.annotations.push(annotation);
    Ok(())
}

/// Writes the authoritative annotations of one annotator for one system, in
/// corpus order. Zero severities are left blank.
pub fn export_sheet(
    project: &Project,
    system_id: &SystemId,
    annotator_id: &AnnotatorId,
    delimiter: Delimiter,
) -> Result<String, SheetError> {
    if !project.systems().contains(system_id) {
        return Err(SheetError::UnknownSystem(system_id.clone()));
    }
    if !project.has_annotator(annotator_id) {
        return Err(SheetError::UnknownAnnotator(annotator_id.clone()));
    }
    let auth = project.authoritative_annotations().map_err(|e| SheetError::Malformed {
        row: 0,
        message: e.to_string(),
    })?;

    let mut writer = csv::WriterBuilder::new()
        .delimiter(delimiter.byte())
        .from_writer(Vec::new());
    writer.write_record(SHEET_HEADER).expect("in-memory write");
    let mut rows = 0;
    for seg in &project.segments {
        let key = AnnotationKey {
            annotator_id: annotator_id.clone(),
            segment_id: seg.id.clone(),
            system_id: system_id.clone(),
        };
        let (Some(a), Some(out)) = (auth.get(&key), project.output(&seg.id, system_id)) else {
            continue;
        };
        let mut record = vec![seg.source_da.clone(), seg.gold_msa.clone(), out.hypothesis.clone()];
        for c in ErrorCategory::ALL {
            let s = a.severity(c);
            record.push(if s.is_error() {
                s.level().to_string()
            } else {
                String::new()
            });
        }
        record.push(fixed(raw_segs(a, &project.config), 2));
        writer.write_record(&record).expect("in-memory write");
        rows += 1;
    }
    if rows == 0 {
        return Err(SheetError::NoAnnotations {
            system_id: system_id.clone(),
            annotator_id: annotator_id.clone(),
        });
    }
    let bytes = writer.into_inner().expect("in-memory flush");
    Ok(String::from_utf8(bytes).expect("utf-8 in, utf-8 out"))
}
