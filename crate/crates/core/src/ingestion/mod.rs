//! Import and export: annotation sheets, parallel corpora and project files.

mod corpus;
mod project_file;
mod sheet;

pub use corpus::{import_corpus, CorpusError, CorpusSummary};
pub use project_file::{from_document, load_project, save_project, to_document, ProjectFileError, FORMAT_VERSION};
pub use sheet::{
    export_sheet, import_sheet, Delimiter, ImportOutcome, RowRejection, RowWarning, SheetError, SHEET_HEADER,
};

/// Strips a UTF-8 byte order mark and checks the encoding.
pub(crate) fn decode_utf8(bytes: &[u8]) -> Result<&str, std::str::Utf8Error> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    std::str::from_utf8(bytes)
}

/// Tab when the header line contains one, comma otherwise.
pub(crate) fn sniff_delimiter(text: &str) -> u8 {
    let header = text.lines().next().unwrap_or_default();
    if header.contains('\t') {
        b'\t'
    } else {
        b','
    }
}
