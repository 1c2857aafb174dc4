//! `mtqe`: run a post-editing evaluation from the command line.
//!
//! Failures exit nonzero and print one JSON object on stderr:
//! `{"error": kind, "message": ..., "details": ...}`.

use std::fs;
use std::io::{self, Read, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mtqe_core::demo::demo_project;
use mtqe_core::ingestion::{
    export_sheet, import_corpus, import_sheet, load_project, save_project, Delimiter, ProjectFileError, SheetError,
};
use mtqe_core::model::{ratio_str, AnnotatorId, ModelError, Project, SystemId};
use mtqe_core::protocol::DecisionTree;
use mtqe_core::reports::{render_report, OutputFormat, ReportError, ReportKind};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "mtqe",
    version,
    about = "Post-editing error annotation, scoring and agreement for MT evaluation"
)]
struct Cli {
    /// Directory for project files given by bare name.
    #[arg(long, global = true, env = "MTQE_DATA_DIR", default_value = ".")]
    data_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create a project file.
    Init {
        project: String,
        /// Display name (defaults to the file stem).
        #[arg(long)]
        name: Option<String>,
        /// Fill the project with the bundled synthetic demo data.
        #[arg(long)]
        demo: bool,
        /// Register annotators up front.
        #[arg(long = "annotator")]
        annotators: Vec<String>,
        /// Weight of the adaptation category in SEGS, e.g. `1/2` or `0.5`.
        #[arg(long)]
        adp_weight: Option<String>,
        /// Upper bound of the minor bucket.
        #[arg(long)]
        minor_upper: Option<String>,
        /// Replace an existing file.
        #[arg(long)]
        force: bool,
    },
    /// Add segments and system outputs from a DA/GOLD/SYSTEM/MT file (`-` for stdin).
    ImportCorpus {
        project: String,
        #[arg(default_value = "-")]
        input: String,
    },
    /// Import one annotator's sheet for one system. Any bad row aborts the import.
    ImportSheet {
        project: String,
        #[arg(long)]
        system: String,
        #[arg(long)]
        annotator: String,
        #[arg(default_value = "-")]
        input: String,
    },
    /// Write one annotator's sheet for one system.
    ExportSheet {
        project: String,
        #[arg(long)]
        system: String,
        #[arg(long)]
        annotator: String,
        #[arg(long, value_enum, default_value_t = DelimiterArg::Tab)]
        delimiter: DelimiterArg,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check a sheet without importing it.
    Validate {
        #[arg(default_value = "-")]
        input: String,
        /// Check against this project (hypotheses, existing segments).
        #[arg(long)]
        project: Option<String>,
        #[arg(long, default_value = "system")]
        system: String,
        #[arg(long, default_value = "annotator")]
        annotator: String,
    },
    /// Per-segment scores.
    Score {
        project: String,
        #[arg(long, default_value = "text")]
        format: String,
    },
    /// Inter-annotator agreement table.
    Agreement {
        project: String,
        #[arg(long, default_value = "text")]
        format: String,
    },
    /// Any report: scores, severity, pattern or agreement.
    Report {
        project: String,
        #[arg(long)]
        kind: String,
        #[arg(long, default_value = "text")]
        format: String,
    },
    /// Run the HTTP service over the data directory.
    Serve {
        #[arg(long, env = "MTQE_LISTEN", default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        /// Also open this project file.
        #[arg(long, env = "MTQE_PROJECT")]
        project: Option<PathBuf>,
    },
    /// Validate a decision-tree file (the bundled tree when omitted).
    TreeCheck { file: Option<PathBuf> },
}

#[derive(Clone, Copy, ValueEnum)]
enum DelimiterArg {
    Tab,
    Comma,
}

#[derive(Debug)]
struct CliError {
    kind: &'static str,
    message: String,
    details: Value,
}

impl CliError {
    fn new(kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
            details: Value::Null,
        }
    }

    fn details(mut self, details: Value) -> Self {
        self.details = details;
        self
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::new("Io", e.to_string())
    }
}

impl From<ProjectFileError> for CliError {
    fn from(e: ProjectFileError) -> Self {
        let kind = match e {
            ProjectFileError::VersionMismatch { .. } => "VersionMismatch",
            ProjectFileError::CorruptFile(_) => "CorruptFile",
            ProjectFileError::Invalid(_) => "InvalidProject",
            ProjectFileError::Io(_) => "Io",
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::new("InvalidProject", e.to_string())
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        CliError::new(e.kind(), e.to_string()).details(e.details())
    }
}

impl From<SheetError> for CliError {
    fn from(e: SheetError) -> Self {
        let details = serde_json::to_value(&e).unwrap_or(Value::Null);
        CliError::new("SheetError", e.to_string()).details(details)
    }
}

type Result<T, E = CliError> = std::result::Result<T, E>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = io::stdout().lock();
    match run(cli, &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = json!({ "error": e.kind, "message": e.message, "details": e.details });
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}

/// A bare name lives in the data directory with the `.mtqe` extension;
/// anything that looks like a path is used as given.
fn resolve(data_dir: &Path, project: &str) -> PathBuf {
    let p = Path::new(project);
    if p.components().count() > 1 || p.extension().is_some() {
        return p.to_path_buf();
    }
    data_dir.join(format!("{project}.{}", mtqe_service::PROJECT_EXT))
}

fn read_input(input: &str) -> Result<Vec<u8>> {
    if input == "-" {
        let mut buf = Vec::new();
        io::stdin().read_to_end(&mut buf)?;
        Ok(buf)
    } else {
        fs::read(input).map_err(|e| CliError::new("Io", format!("{input}: {e}")))
    }
}

fn parse_format(f: &str) -> Result<OutputFormat> {
    f.parse().map_err(|e: String| CliError::new("Usage", e))
}

fn print_report(out: &mut impl Write, project: &Project, kind: ReportKind, format: &str) -> Result<()> {
    let text = render_report(project, &project.config, kind, parse_format(format)?)?;
    out.write_all(text.as_bytes())?;
    Ok(())
}

fn run(cli: Cli, out: &mut impl Write) -> Result<()> {
    let data_dir = cli.data_dir;
    let load = |p: &str| -> Result<(PathBuf, Project)> {
        let path = resolve(&data_dir, p);
        let project = load_project(&path).map_err(|e| match e {
            ProjectFileError::Io(io) if io.kind() == io::ErrorKind::NotFound => {
                CliError::new("NotFound", format!("no project file at {}", path.display()))
            }
            other => other.into(),
        })?;
        Ok((path, project))
    };

    match cli.command {
        Command::Init {
            project,
            name,
            demo,
            annotators,
            adp_weight,
            minor_upper,
            force,
        } => {
            let path = resolve(&data_dir, &project);
            if path.exists() && !force {
                return Err(CliError::new(
                    "Conflict",
                    format!("{} exists (use --force to replace)", path.display()),
                ));
            }
            let mut p = if demo { demo_project() } else { Project::new("") };
            p.name = name.unwrap_or_else(|| {
                if demo {
                    p.name.clone()
                } else {
                    path.file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default()
                }
            });
            for a in annotators {
                p.add_annotator(AnnotatorId::new(a));
            }
            if let Some(w) = adp_weight {
                p.config.adp_weight = ratio_str::parse(&w).map_err(|e| CliError::new("Usage", e))?;
            }
            if let Some(m) = minor_upper {
                p.config.minor_upper = ratio_str::parse(&m).map_err(|e| CliError::new("Usage", e))?;
            }
            p.check_invariants()?;
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            save_project(&p, &path)?;
            writeln!(
                out,
                "created {} ({} segments, {} annotations)",
                path.display(),
                p.segments.len(),
                p.annotations.len()
            )?;
            if let Some(advice) = p.size_advisory() {
                eprintln!("note: {advice}");
            }
        }
        Command::ImportCorpus { project, input } => {
            let (path, mut p) = load(&project)?;
            let bytes = read_input(&input)?;
            let summary = import_corpus(&bytes[..], &mut p).map_err(|e| {
                let row = match &e {
                    mtqe_core::ingestion::CorpusError::Row { row, .. }
                    | mtqe_core::ingestion::CorpusError::Model { row, .. } => Some(*row),
                    _ => None,
                };
                CliError::new("CorpusError", e.to_string()).details(json!({ "row": row }))
            })?;
            save_project(&p, &path)?;
            writeln!(
                out,
                "read {} rows: {} new segments, {} new outputs",
                summary.rows, summary.segments_added, summary.outputs_added
            )?;
        }
        Command::ImportSheet {
            project,
            system,
            annotator,
            input,
        } => {
            let (path, mut p) = load(&project)?;
            let bytes = read_input(&input)?;
            let outcome = import_sheet(&bytes[..], SystemId::new(system), AnnotatorId::new(annotator), &p)?;
            if !outcome.rejected.is_empty() {
                return Err(rejected(&outcome.rejected, "nothing was imported"));
            }
            for w in &outcome.warnings {
                eprintln!("warning: row {}: {}", w.row, w.message);
            }
            let n = outcome.annotations.len();
            let (segs, outs) = (outcome.new_segments.len(), outcome.new_outputs.len());
            outcome.commit(&mut p)?;
            save_project(&p, &path)?;
            writeln!(
                out,
                "imported {n} annotations ({segs} new segments, {outs} new outputs)"
            )?;
        }
        Command::ExportSheet {
            project,
            system,
            annotator,
            delimiter,
            output,
        } => {
            let (_, p) = load(&project)?;
            let delimiter = match delimiter {
                DelimiterArg::Tab => Delimiter::Tab,
                DelimiterArg::Comma => Delimiter::Comma,
            };
            let text = export_sheet(&p, &SystemId::new(system), &AnnotatorId::new(annotator), delimiter)?;
            match output {
                Some(file) => fs::write(file, text)?,
                None => out.write_all(text.as_bytes())?,
            }
        }
        Command::Validate {
            input,
            project,
            system,
            annotator,
        } => {
            let p = match project {
                Some(name) => load(&name)?.1,
                None => Project::new("validate"),
            };
            let bytes = read_input(&input)?;
            let outcome = import_sheet(&bytes[..], SystemId::new(system), AnnotatorId::new(annotator), &p)?;
            for w in &outcome.warnings {
                eprintln!("warning: row {}: {}", w.row, w.message);
            }
            if !outcome.rejected.is_empty() {
                return Err(rejected(&outcome.rejected, "sheet is invalid"));
            }
            writeln!(out, "ok: {} rows", outcome.rows_read)?;
        }
        Command::Score { project, format } => {
            let (_, p) = load(&project)?;
            print_report(out, &p, ReportKind::Scores, &format)?;
        }
        Command::Agreement { project, format } => {
            let (_, p) = load(&project)?;
            print_report(out, &p, ReportKind::Agreement, &format)?;
        }
        Command::Report { project, kind, format } => {
            let kind: ReportKind = kind.parse().map_err(|e: String| CliError::new("Usage", e))?;
            let (_, p) = load(&project)?;
            print_report(out, &p, kind, &format)?;
        }
        Command::Serve { listen, project } => {
            let config = mtqe_service::ServiceConfig {
                listen,
                data_dir,
                project_file: project,
            };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(mtqe_service::serve(config))
                .map_err(|e| CliError::new("ServeError", e.to_string()))?;
        }
        Command::TreeCheck { file } => {
            let (label, tree) = match file {
                Some(f) => {
                    let src =
                        fs::read_to_string(&f).map_err(|e| CliError::new("Io", format!("{}: {e}", f.display())))?;
                    let tree = DecisionTree::from_toml(&src).map_err(|e| CliError::new("TreeError", e.to_string()))?;
                    (f.display().to_string(), tree)
                }
                None => ("bundled tree".to_owned(), DecisionTree::default_tree()),
            };
            let walks = tree.explore();
            let broken: Vec<String> = walks
                .iter()
                .filter_map(|w| w.result.as_ref().err().map(|e| format!("{:?}: {e}", w.responses)))
                .collect();
            if !broken.is_empty() {
                return Err(CliError::new(
                    "TreeError",
                    format!("{} walk(s) end in an invalid annotation", broken.len()),
                )
                .details(json!({ "walks": broken })));
            }
            writeln!(
                out,
                "ok: {label} (version {}), {} nodes, {} complete walks",
                tree.version(),
                tree.nodes().len(),
                walks.len()
            )?;
        }
    }
    Ok(())
}

fn rejected(rows: &[mtqe_core::ingestion::RowRejection], what: &str) -> CliError {
    let first = rows[0].error.to_string();
    let more = if rows.len() > 1 {
        format!(" (and {} more)", rows.len() - 1)
    } else {
        String::new()
    };
    CliError::new("RejectedRows", format!("{what}: {first}{more}")).details(json!({
        "rejected": rows
            .iter()
            .map(|r| json!({ "row": r.row, "message": r.error.to_string(), "error": r.error }))
            .collect::<Vec<_>>()
    }))
}
