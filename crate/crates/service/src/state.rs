//! Project registry. Each project keeps an immutable snapshot that readers
//! clone cheaply, plus a writer lock; mutations build a new project, persist
//! it and only then publish it as the snapshot.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use mtqe_core::ingestion::{load_project, save_project, ProjectFileError};
use mtqe_core::model::{Project, ScoringConfig};
use mtqe_core::protocol::ProtocolState;
use parking_lot::{Mutex, RwLock};
use uuid::Uuid;

use crate::error::ApiError;

pub const PROJECT_EXT: &str = "mtqe";

/// Where the service keeps its projects.
#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub listen: std::net::SocketAddr,
    pub data_dir: PathBuf,
    /// Extra project file opened at startup, wherever it lives.
    pub project_file: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub state: ProtocolState,
    /// Revision of the triple when the session started.
    pub base_revision: u64,
    pub consumed: bool,
}

pub struct ProjectHandle {
    pub id: String,
    path: PathBuf,
    snapshot: RwLock<Arc<Project>>,
    writer: Mutex<()>,
    pub sessions: Mutex<HashMap<Uuid, Session>>,
}

impl ProjectHandle {
    fn new(id: String, path: PathBuf, project: Project) -> Self {
        Self {
            id,
            path,
            snapshot: RwLock::new(Arc::new(project)),
            writer: Mutex::new(()),
            sessions: Mutex::new(HashMap::new()),
        }
    }

    pub fn snapshot(&self) -> Arc<Project> {
        self.snapshot.read().clone()
    }

    /// Runs `f` on a copy of the project under the writer lock. The copy is
    /// saved and published only if `f` succeeds.
    pub fn mutate<T>(&self, f: impl FnOnce(&mut Project) -> Result<T, ApiError>) -> Result<T, ApiError> {
        let _guard = self.writer.lock();
        let mut draft = (*self.snapshot()).clone();
        let out = f(&mut draft)?;
        save_project(&draft, &self.path)?;
        *self.snapshot.write() = Arc::new(draft);
        Ok(out)
    }
}

pub struct Registry {
    data_dir: PathBuf,
    projects: RwLock<BTreeMap<String, Arc<ProjectHandle>>>,
    create_lock: Mutex<()>,
}

impl Registry {
    /// Loads every project file in `data_dir` plus the optional extra file.
    pub fn open(data_dir: &Path, extra: Option<&Path>) -> Result<Self, ProjectFileError> {
        fs::create_dir_all(data_dir)?;
        let mut projects = BTreeMap::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(data_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == PROJECT_EXT))
            .collect();
        if let Some(p) = extra {
            if !paths.iter().any(|q| same_file(q, p)) {
                paths.push(p.to_path_buf());
            }
        }
        paths.sort();
        for path in paths {
            let project = load_project(&path)?;
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| Uuid::new_v4().to_string());
            projects.insert(id.clone(), Arc::new(ProjectHandle::new(id, path, project)));
        }
        Ok(Self {
            data_dir: data_dir.to_path_buf(),
            projects: RwLock::new(projects),
            create_lock: Mutex::new(()),
        })
    }

    pub fn get(&self, id: &str) -> Result<Arc<ProjectHandle>, ApiError> {
        self.projects
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no project `{id}`")))
    }

    pub fn list(&self) -> Vec<Arc<ProjectHandle>> {
        self.projects.read().values().cloned().collect()
    }

    pub fn create(&self, name: &str, config: Option<ScoringConfig>) -> Result<Arc<ProjectHandle>, ApiError> {
        let _guard = self.create_lock.lock();
        if self.list().iter().any(|h| h.snapshot().name == name) {
            return Err(ApiError::new(
                axum::http::StatusCode::CONFLICT,
                "Conflict",
                format!("a project named `{name}` already exists"),
            ));
        }
        let mut project = Project::new(name);
        if let Some(cfg) = config {
            cfg.validate().map_err(|e| ApiError::bad_request(e.to_string()))?;
            project.config = cfg;
        }
        let id = Uuid::new_v4().simple().to_string();
        let path = self.data_dir.join(format!("{id}.{PROJECT_EXT}"));
        save_project(&project, &path)?;
        let handle = Arc::new(ProjectHandle::new(id.clone(), path, project));
        self.projects.write().insert(id, handle.clone());
        Ok(handle)
    }

    pub fn delete(&self, id: &str) -> Result<(), ApiError> {
        let _guard = self.create_lock.lock();
        let handle = self
            .projects
            .write()
            .remove(id)
            .ok_or_else(|| ApiError::not_found(format!("no project `{id}`")))?;
        let _writer = handle.writer.lock();
        fs::remove_file(&handle.path).map_err(ProjectFileError::from)?;
        Ok(())
    }
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}
