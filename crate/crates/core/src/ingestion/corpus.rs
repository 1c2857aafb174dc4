//! Parallel corpus import: one row per (segment, system) with columns
//! `DA, GOLD, SYSTEM, MT` and an optional `ID`. Rows sharing the same
//! DA/GOLD text (or ID) share a segment. SYSTEM and MT may be empty to add a
//! bare segment.

use std::collections::HashMap;
use std::io::Read;

use serde::Serialize;
use thiserror::Error;

use crate::model::{ModelError, Project, Segment, SegmentId, SystemId, SystemOutput};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("bad corpus header: {0}")]
    BadHeader(String),
    #[error("corpus is not valid UTF-8: {0}")]
    Encoding(String),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("row {row}: {source}")]
    Model { row: usize, source: ModelError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CorpusSummary {
    pub segments_added: usize,
    pub outputs_added: usize,
    pub rows: usize,
}

/// Adds the corpus to `project`. All-or-nothing: on error the project is left
/// untouched.
pub fn import_corpus(mut input: impl Read, project: &mut Project) -> Result<CorpusSummary, CorpusError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let text = super::decode_utf8(&bytes).map_err(|e| CorpusError::Encoding(e.to_string()))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(super::sniff_delimiter(text))
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| CorpusError::BadHeader(e.to_string()))?
        .clone();
    let mut pos: HashMap<String, usize> = HashMap::new();
    for (i, h) in header.iter().enumerate() {
        let name = h.trim().to_ascii_uppercase();
        if !["ID", "DA", "GOLD", "SYSTEM", "MT"].contains(&name.as_str()) {
            return Err(CorpusError::BadHeader(format!("unexpected column `{name}`")));
        }
        if pos.insert(name.clone(), i).is_some() {
            return Err(CorpusError::BadHeader(format!("column `{name}` appears twice")));
        }
    }
    let need = |n: &str| {
        pos.get(n)
            .copied()
            .ok_or_else(|| CorpusError::BadHeader(format!("missing column `{n}`")))
    };
    let (da, gold, system, mt) = (need("DA")?, need("GOLD")?, need("SYSTEM")?, need("MT")?);
    let id_col = pos.get("ID").copied();

    let mut staged = project.clone();
    let mut summary = CorpusSummary::default();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| CorpusError::Row {
            row,
            message: e.to_string(),
        })?;
        let cell = |c: usize| rec.get(c).unwrap_or_default();
        summary.rows += 1;

        let explicit_id = id_col.map(cell).filter(|s| !s.trim().is_empty());
        let found = match explicit_id {
            Some(id) => staged.segment(&SegmentId::new(id)).map(|s| s.id.clone()),
            None => staged.segment_by_text(cell(da), cell(gold)).map(|s| s.id.clone()),
        };
        let segment_id = match found {
            Some(id) => {
                let seg = staged.segment(&id).expect("just found");
                if seg.source_da != cell(da) || seg.gold_msa != cell(gold) {
                    return Err(CorpusError::Row {
                        row,
                        message: format!("segment `{id}` already exists with different text"),
                    });
                }
                id
            }
            None => {
                let id = explicit_id
                    .map(SegmentId::new)
                    .unwrap_or_else(|| staged.next_segment_id());
                staged
                    .add_segment(Segment::new(id.clone(), cell(da), cell(gold)))
                    .map_err(|source| CorpusError::Model { row, source })?;
                summary.segments_added += 1;
                id
            }
        };

        let system_id = cell(system).trim();
        if system_id.is_empty() {
            continue;
        }
        let output = SystemOutput {
            segment_id,
            system_id: SystemId::new(system_id),
            hypothesis: cell(mt).to_owned(),
        };
        staged
            .add_output(output)
            .map_err(|source| CorpusError::Model { row, source })?;
        summary.outputs_added += 1;
    }
    *project = staged;
    Ok(summary)
}
