//! Studio download with an on-disk cache.
//!
//! Layout under `dest`:
//!
//! ```text
//! dest/manifest.json
//! dest/<project_id>/project.json
//! dest/<project_id>/<md5>.<ext>
//! ```
//!
//! `project.json` is written last, so its presence marks a complete cache
//! entry.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{IngestError, PROJECT_JSON};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: Vec<u8>,
}

impl HttpResponse {
    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }
}

/// Minimal blocking GET transport. `Err` means the request never produced a
/// status (DNS, connection, TLS failures).
pub trait HttpClient: Sync {
    fn get(&self, url: &str) -> Result<HttpResponse, String>;
}

/// Remote endpoints. Placeholders `{studio_id}`, `{offset}`, `{limit}`,
/// `{project_id}`, `{token}` and `{md5ext}` are substituted per request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endpoints {
    pub studio_projects: String,
    /// Metadata endpoint returning a `project_token`; `None` skips the token
    /// exchange and requests `project_json` without `{token}`.
    pub project_meta: Option<String>,
    pub project_json: String,
    pub asset: String,
    /// Extra header sent with every request, as `(name, value)`.
    pub header: Option<(String, String)>,
}

impl Default for Endpoints {
    fn default() -> Self {
        Endpoints {
            studio_projects:
                "https://api.scratch.mit.edu/studios/{studio_id}/projects?limit={limit}&offset={offset}"
                    .into(),
            project_meta: Some("https://api.scratch.mit.edu/projects/{project_id}".into()),
            project_json: "https://projects.scratch.mit.edu/{project_id}?token={token}".into(),
            asset: "https://assets.scratch.mit.edu/internalapi/asset/{md5ext}/get/".into(),
            header: None,
        }
    }
}

impl Endpoints {
    /// Points every endpoint at one base URL using the Scratch path layout.
    /// Used for mirrors and local test servers.
    pub fn with_base(base: &str) -> Self {
        let base = base.trim_end_matches('/');
        Endpoints {
            studio_projects: format!(
                "{base}/studios/{{studio_id}}/projects?limit={{limit}}&offset={{offset}}"
            ),
            project_meta: None,
            project_json: format!("{base}/projects/{{project_id}}/project.json"),
            asset: format!("{base}/assets/{{md5ext}}"),
            header: None,
        }
    }
}

fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, value) in vars {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    out
}

#[derive(Debug, Clone)]
pub struct FetchOptions {
    pub endpoints: Endpoints,
    pub limit: Option<usize>,
    pub page_size: usize,
    pub parallelism: usize,
}

impl Default for FetchOptions {
    fn default() -> Self {
        FetchOptions {
            endpoints: Endpoints::default(),
            limit: None,
            page_size: 40,
            parallelism: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FetchStatus {
    Fetched,
    Cached,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub project_id: String,
    pub title: String,
    pub local_path: PathBuf,
    pub status: FetchStatus,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing_assets: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchManifest {
    pub studio_id: String,
    pub entries: Vec<ManifestEntry>,
}

impl FetchManifest {
    pub fn count(&self, status: FetchStatus) -> usize {
        self.entries.iter().filter(|e| e.status == status).count()
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let bytes = fs::read(path).map_err(|e| IngestError::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| IngestError::InvalidJson {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), IngestError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(path, text).map_err(|e| IngestError::io(path, e))
    }
}

struct RosterItem {
    project_id: String,
    title: String,
}

fn parse_roster_page(body: &[u8]) -> Result<Vec<RosterItem>, String> {
    let value: Value = serde_json::from_slice(body).map_err(|e| e.to_string())?;
    let items = value.as_array().ok_or("roster page is not an array")?;
    items
        .iter()
        .map(|item| {
            let project_id = match item.get("id") {
                Some(Value::Number(n)) => n.to_string(),
                Some(Value::String(s)) => s.clone(),
                _ => return Err("roster entry without id".to_string()),
            };
            let title = item
                .get("title")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string();
            Ok(RosterItem { project_id, title })
        })
        .collect()
}

fn list_studio(
    client: &dyn HttpClient,
    studio_id: &str,
    opts: &FetchOptions,
) -> Result<Vec<RosterItem>, IngestError> {
    let page_size = opts.page_size.max(1);
    let mut roster: Vec<RosterItem> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut offset = 0usize;
    loop {
        let url = fill(
            &opts.endpoints.studio_projects,
            &[
                ("studio_id", studio_id),
                ("limit", &page_size.to_string()),
                ("offset", &offset.to_string()),
            ],
        );
        let resp = client
            .get(&url)
            .map_err(|message| IngestError::Http { url: url.clone(), message })?;
        if resp.status == 404 && offset == 0 {
            return Err(IngestError::StudioNotFound(studio_id.to_string()));
        }
        if !resp.is_success() {
            return Err(IngestError::Http {
                url,
                message: format!("HTTP {}", resp.status),
            });
        }
        let page = parse_roster_page(&resp.body)
            .map_err(|message| IngestError::Http { url, message })?;
        let page_len = page.len();
        for item in page {
            if seen.insert(item.project_id.clone()) {
                roster.push(item);
            }
        }
        offset += page_len;
        let full = opts.limit.is_some_and(|limit| roster.len() >= limit);
        if page_len < page_size || full {
            break;
        }
    }
    if let Some(limit) = opts.limit {
        roster.truncate(limit);
    }
    Ok(roster)
}

/// `md5ext` of every costume and sound referenced by a project document.
fn referenced_assets(project: &Value) -> BTreeSet<String> {
    let mut names = BTreeSet::new();
    let targets = project.get("targets").and_then(Value::as_array);
    for target in targets.into_iter().flatten() {
        for list in ["costumes", "sounds"] {
            let media = target.get(list).and_then(Value::as_array);
            for item in media.into_iter().flatten() {
                let md5ext = item.get("md5ext").and_then(Value::as_str).map(str::to_owned);
                let derived = || {
                    let id = item.get("assetId")?.as_str()?;
                    let fmt = item.get("dataFormat")?.as_str()?;
                    Some(format!("{id}.{fmt}"))
                };
                if let Some(name) = md5ext.or_else(derived) {
                    // Asset names become file names; refuse anything path-like.
                    if !name.is_empty() && !name.contains(['/', '\\']) && !name.starts_with('.') {
                        names.insert(name);
                    }
                }
            }
        }
    }
    names
}

fn get_ok(client: &dyn HttpClient, url: &str) -> Result<Vec<u8>, String> {
    let resp = client.get(url)?;
    if resp.is_success() {
        Ok(resp.body)
    } else {
        Err(format!("HTTP {} from {url}", resp.status))
    }
}

fn project_token(client: &dyn HttpClient, template: &str, project_id: &str) -> Result<String, String> {
    let url = fill(template, &[("project_id", project_id)]);
    let body = get_ok(client, &url)?;
    let meta: Value = serde_json::from_slice(&body).map_err(|e| e.to_string())?;
    meta.get("project_token")
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| format!("no project_token in {url}"))
}

fn fetch_one(
    client: &dyn HttpClient,
    item: &RosterItem,
    dest: &Path,
    endpoints: &Endpoints,
) -> ManifestEntry {
    let dir = dest.join(&item.project_id);
    let mut entry = ManifestEntry {
        project_id: item.project_id.clone(),
        title: item.title.clone(),
        local_path: dir.clone(),
        status: FetchStatus::Cached,
        missing_assets: Vec::new(),
        error: None,
    };
    if dir.join(PROJECT_JSON).is_file() {
        return entry;
    }

    let download = || -> Result<Vec<String>, String> {
        let token = match &endpoints.project_meta {
            Some(template) => project_token(client, template, &item.project_id)?,
            None => String::new(),
        };
        let url = fill(
            &endpoints.project_json,
            &[("project_id", &item.project_id), ("token", &token)],
        );
        let body = get_ok(client, &url)?;
        let document: Value = serde_json::from_slice(&body)
            .map_err(|e| format!("project JSON from {url} is invalid: {e}"))?;
        if !document.is_object() {
            return Err(format!("project JSON from {url} is not an object"));
        }

        fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
        let mut missing = Vec::new();
        for name in referenced_assets(&document) {
            let path = dir.join(&name);
            if path.is_file() {
                continue;
            }
            let url = fill(&endpoints.asset, &[("md5ext", &name)]);
            match get_ok(client, &url) {
                Ok(data) => fs::write(&path, data).map_err(|e| format!("{}: {e}", path.display()))?,
                Err(e) => {
                    log::warn!("project {}: asset {name} unavailable: {e}", item.project_id);
                    missing.push(name);
                }
            }
        }

        let tmp = dir.join(".project.json.part");
        fs::write(&tmp, &body).map_err(|e| format!("{}: {e}", tmp.display()))?;
        fs::rename(&tmp, dir.join(PROJECT_JSON)).map_err(|e| format!("{}: {e}", dir.display()))?;
        Ok(missing)
    };

    match download() {
        Ok(missing) => {
            entry.status = FetchStatus::Fetched;
            entry.missing_assets = missing;
        }
        Err(e) => {
            log::warn!("project {}: {e}", item.project_id);
            entry.status = FetchStatus::Failed;
            entry.error = Some(e);
        }
    }
    entry
}

/// Downloads a studio into `dest` and writes `dest/manifest.json`.
///
/// Already cached projects are not downloaded again. Per-project failures are
/// recorded in the manifest; only a missing studio or a broken roster listing
/// fails the call.
pub fn fetch_studio(
    client: &dyn HttpClient,
    studio_id: &str,
    dest: &Path,
    opts: &FetchOptions,
) -> Result<FetchManifest, IngestError> {
    fs::create_dir_all(dest).map_err(|e| IngestError::io(dest, e))?;
    let roster = list_studio(client, studio_id, opts)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.parallelism.max(1))
        .build()
        .expect("thread pool");
    let mut entries: Vec<ManifestEntry> = pool.install(|| {
        use rayon::prelude::*;
        roster
            .par_iter()
            .map(|item| fetch_one(client, item, dest, &opts.endpoints))
            .collect()
    });
    entries.sort_by(|a, b| a.project_id.cmp(&b.project_id));

    let manifest = FetchManifest {
        studio_id: studio_id.to_string(),
        entries,
    };
    manifest.save(&dest.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// [`HttpClient`] backed by a blocking `reqwest` client.
#[cfg(feature = "net")]
pub struct ReqwestClient {
    inner: reqwest::blocking::Client,
    header: Option<(String, String)>,
}

#[cfg(feature = "net")]
impl ReqwestClient {
    pub fn new(endpoints: &Endpoints) -> Result<Self, String> {
        let inner = reqwest::blocking::Client::builder()
            .user_agent(concat!("ccs/", env!("CARGO_PKG_VERSION")))
            .timeout(std::time::Duration::from_secs(60))
            .build()
            .map_err(|e| e.to_string())?;
        Ok(ReqwestClient {
            inner,
            header: endpoints.header.clone(),
        })
    }
}

#[cfg(feature = "net")]
impl HttpClient for ReqwestClient {
    fn get(&self, url: &str) -> Result<HttpResponse, String> {
        let mut req = self.inner.get(url);
        if let Some((name, value)) = &self.header {
            req = req.header(name.as_str(), value.as_str());
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.bytes().map_err(|e| e.to_string())?.to_vec();
        Ok(HttpResponse { status, body })
    }
}
