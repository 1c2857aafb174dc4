//! Project files.
//!
//! ```text
//! mtqe-project format=1 sha256=<hex digest of everything after this line>
//! { ...pretty JSON project... }
//! ```
//!
//! Saving writes a sibling temp file and renames it over the target, so a
//! crash leaves either the old or the new document on disk.

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{ModelError, Project};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "mtqe-project";

#[derive(Debug, Error)]
pub enum ProjectFileError {
    #[error("project file format {found} is not supported (this build reads up to {supported})")]
    VersionMismatch { found: u32, supported: u32 },
    #[error("corrupt project file: {0}")]
    CorruptFile(String),
    #[error("project file violates project invariants: {0}")]
    Invalid(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn digest(body: &[u8]) -> String {
    hex::encode(Sha256::digest(body))
}

pub fn to_document(project: &Project) -> String {
    let mut body = serde_json::to_string_pretty(project).expect("project serializes");
    body.push('\n');
    format!(
        "{MAGIC} format={FORMAT_VERSION} sha256={}\n{body}",
        digest(body.as_bytes())
    )
}

pub fn from_document(doc: &str) -> Result<Project, ProjectFileError> {
    let corrupt = |m: &str| ProjectFileError::CorruptFile(m.to_owned());
    let (header, body) = doc.split_once('\n').ok_or_else(|| corrupt("missing header line"))?;
    let mut fields = header.split(' ');
    if fields.next() != Some(MAGIC) {
        return Err(corrupt("not a project file"));
    }
    let mut version = None;
    let mut checksum = None;
    for f in fields {
        match f.split_once('=') {
            Some(("format", v)) => version = v.parse::<u32>().ok(),
            Some(("sha256", v)) => checksum = Some(v),
            _ => return Err(corrupt("unrecognised header field")),
        }
    }
    let version = version.ok_or_else(|| corrupt("missing format version"))?;
    if version != FORMAT_VERSION {
        return Err(ProjectFileError::VersionMismatch {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let checksum = checksum.ok_or_else(|| corrupt("missing checksum"))?;
    if digest(body.as_bytes()) != checksum {
        return Err(corrupt("checksum mismatch (file truncated or edited)"));
    }
    let project: Project = serde_json::from_str(body).map_err(|e| ProjectFileError::CorruptFile(e.to_string()))?;
    project.check_invariants()?;
    Ok(project)
}

pub fn save_project(project: &Project, path: &Path) -> Result<(), ProjectFileError> {
    let doc = to_document(project);
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let file_name = path
        .file_name()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "project path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp-{}", file_name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(doc.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_project(path: &Path) -> Result<Project, ProjectFileError> {
    let bytes = fs::read(path)?;
    let text = String::from_utf8(bytes).map_err(|e| ProjectFileError::CorruptFile(e.to_string()))?;
    from_document(&text)
}
