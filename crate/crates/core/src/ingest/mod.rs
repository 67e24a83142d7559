//! Acquisition of studio project data.
//!
//! Projects arrive either as `.sb3` archives, as unpacked folders holding a
//! `project.json` next to its asset files, or from the Scratch web API via
//! [`fetch_studio`]. Every route produces [`RawProject`] values.

mod fetch;

use std::collections::BTreeMap;
use std::fs;
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

pub use fetch::{
    fetch_studio, Endpoints, FetchManifest, FetchOptions, FetchStatus, HttpClient, HttpResponse,
    ManifestEntry, MANIFEST_FILE,
};

#[cfg(feature = "net")]
pub use fetch::ReqwestClient;

pub const PROJECT_JSON: &str = "project.json";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{}: archive has no project.json member", path.display())]
    MissingProjectJson { path: PathBuf },
    #[error("{}: corrupt archive: {source}", path.display())]
    CorruptArchive {
        path: PathBuf,
        #[source]
        source: zip::result::ZipError,
    },
    #[error("{}: project.json is not valid UTF-8", path.display())]
    InvalidUtf8 { path: PathBuf },
    #[error("{}: project.json is not a JSON object: {reason}", path.display())]
    InvalidJson { path: PathBuf, reason: String },
    #[error("no projects found in {}", .0.display())]
    EmptyStudio(PathBuf),
    #[error("studio {0} not found")]
    StudioNotFound(String),
    #[error("request to {url} failed: {message}")]
    Http { url: String, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl IngestError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IngestError::Io {
            path: path.into(),
            source,
        }
    }
}

/// An unpacked project: its `project.json` bytes and every asset file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawProject {
    pub project_id: String,
    pub project_json: Vec<u8>,
    /// Keyed by asset file name (`<md5>.<ext>`).
    pub assets: BTreeMap<String, Vec<u8>>,
}

impl RawProject {
    pub fn new(
        project_id: impl Into<String>,
        project_json: Vec<u8>,
        assets: BTreeMap<String, Vec<u8>>,
    ) -> Self {
        RawProject {
            project_id: project_id.into(),
            project_json,
            assets,
        }
    }

    pub fn asset(&self, name: &str) -> Option<&[u8]> {
        self.assets.get(name).map(Vec::as_slice)
    }
}

fn validate_project_json(path: &Path, bytes: &[u8]) -> Result<(), IngestError> {
    let text = std::str::from_utf8(bytes).map_err(|_| IngestError::InvalidUtf8 {
        path: path.to_path_buf(),
    })?;
    match serde_json::from_str::<serde_json::Value>(text) {
        Ok(serde_json::Value::Object(_)) => Ok(()),
        Ok(_) => Err(IngestError::InvalidJson {
            path: path.to_path_buf(),
            reason: "top-level value is not an object".into(),
        }),
        Err(e) => Err(IngestError::InvalidJson {
            path: path.to_path_buf(),
            reason: e.to_string(),
        }),
    }
}

/// Project id for a file or folder: the file stem.
pub fn project_id_from_path(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Reads an `.sb3` archive from disk.
pub fn read_sb3_archive(path: &Path) -> Result<RawProject, IngestError> {
    let bytes = fs::read(path).map_err(|e| IngestError::io(path, e))?;
    read_sb3_bytes(project_id_from_path(path), &bytes, path)
}

/// Decodes `.sb3` archive bytes. `origin` is only used in error messages.
pub fn read_sb3_bytes(
    project_id: String,
    bytes: &[u8],
    origin: &Path,
) -> Result<RawProject, IngestError> {
    let corrupt = |source| IngestError::CorruptArchive {
        path: origin.to_path_buf(),
        source,
    };
    let mut zip = zip::ZipArchive::new(Cursor::new(bytes)).map_err(corrupt)?;

    let mut project_json = None;
    let mut assets = BTreeMap::new();
    for i in 0..zip.len() {
        let mut entry = zip.by_index(i).map_err(corrupt)?;
        if entry.is_dir() {
            continue;
        }
        let name = entry.name().to_string();
        let mut data = Vec::with_capacity(entry.size() as usize);
        entry
            .read_to_end(&mut data)
            .map_err(|e| corrupt(zip::result::ZipError::Io(e)))?;
        if name == PROJECT_JSON {
            project_json = Some(data);
        } else {
            assets.insert(name, data);
        }
    }

    let project_json = project_json.ok_or_else(|| IngestError::MissingProjectJson {
        path: origin.to_path_buf(),
    })?;
    validate_project_json(origin, &project_json)?;
    Ok(RawProject {
        project_id,
        project_json,
        assets,
    })
}

/// Reads an unpacked project folder: `project.json` plus sibling files.
pub fn read_project_dir(dir: &Path) -> Result<RawProject, IngestError> {
    let json_path = dir.join(PROJECT_JSON);
    let project_json = fs::read(&json_path).map_err(|e| IngestError::io(&json_path, e))?;
    validate_project_json(&json_path, &project_json)?;

    let mut assets = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| IngestError::io(dir, e))? {
        let entry = entry.map_err(|e| IngestError::io(dir, e))?;
        let path = entry.path();
        if !path.is_file() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        if name == PROJECT_JSON || name.starts_with('.') {
            continue;
        }
        let data = fs::read(&path).map_err(|e| IngestError::io(&path, e))?;
        assets.insert(name, data);
    }

    let project_id = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(RawProject {
        project_id,
        project_json,
        assets,
    })
}

/// A project that could not be loaded. Recorded, never fatal for the studio.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoadFailure {
    pub source: String,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct LocalStudio {
    /// Sorted by project id.
    pub projects: Vec<RawProject>,
    pub failures: Vec<LoadFailure>,
}

fn is_sb3(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .is_some_and(|ext| ext.eq_ignore_ascii_case("sb3"))
}

/// Loads every `.sb3` file and every immediate subfolder holding a
/// `project.json` from `dir`. Other entries are ignored.
///
/// Unreadable candidates are reported in [`LocalStudio::failures`]; the call
/// fails with [`IngestError::EmptyStudio`] only when `dir` holds no candidate
/// at all.
pub fn load_local_studio(dir: &Path) -> Result<LocalStudio, IngestError> {
    let mut candidates: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| IngestError::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|path| is_sb3(path) || (path.is_dir() && path.join(PROJECT_JSON).is_file()))
        .collect();
    if candidates.is_empty() {
        return Err(IngestError::EmptyStudio(dir.to_path_buf()));
    }
    candidates.sort();

    use rayon::prelude::*;
    let results: Vec<(PathBuf, Result<RawProject, IngestError>)> = candidates
        .into_par_iter()
        .map(|path| {
            let loaded = if path.is_dir() {
                read_project_dir(&path)
            } else {
                read_sb3_archive(&path)
            };
            (path, loaded)
        })
        .collect();

    let mut studio = LocalStudio::default();
    let mut seen = std::collections::BTreeSet::new();
    for (path, loaded) in results {
        match loaded {
            Ok(project) if !seen.insert(project.project_id.clone()) => {
                studio.failures.push(LoadFailure {
                    source: path.display().to_string(),
                    error: format!("duplicate project id {}", project.project_id),
                });
            }
            Ok(project) => studio.projects.push(project),
            Err(e) => studio.failures.push(LoadFailure {
                source: path.display().to_string(),
                error: e.to_string(),
            }),
        }
    }
    studio
        .projects
        .sort_by(|a, b| a.project_id.cmp(&b.project_id));
    Ok(studio)
}
