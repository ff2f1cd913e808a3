//! Live sessions.
//!
//! Each session has a worker lock that serializes uploads, resets and config
//! changes, and a published view that readers clone from. The view is swapped
//! only after an image is fully processed and written, so a reader never sees
//! a half-applied store.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use novelty_core::io::{
    decode_bytes, load_session, summarize_sidecars, write_outputs, InputSource, ManifestEntry,
    MapKind, OutputError, RunManifest, SessionDir, Sidecar,
};
use novelty_core::{MemorySnapshot, Session, SessionConfig, SessionSummary};

use crate::error::ApiError;

pub const DEFAULT_MAX_UPLOAD_BYTES: usize = 16 * 1024 * 1024;
pub const DEMO_IDLE_TTL: Duration = Duration::from_secs(3600);
const SERVICE_META: &str = "service.json";

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Where session directories live. `None` keeps outputs in a scratch
    /// directory that disappears with the service, and nothing is restored.
    pub out_root: Option<PathBuf>,
    pub max_upload_bytes: usize,
    /// Sessions untouched for this long are dropped. `None` keeps them.
    pub idle_ttl: Option<Duration>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            out_root: None,
            max_upload_bytes: DEFAULT_MAX_UPLOAD_BYTES,
            idle_ttl: None,
        }
    }
}

impl ServiceConfig {
    /// Demo deployment: idle sessions expire after an hour.
    pub fn demo() -> Self {
        ServiceConfig {
            idle_ttl: Some(DEMO_IDLE_TTL),
            ..ServiceConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHandle {
    pub id: String,
    /// Milliseconds since the Unix epoch.
    pub created_at: u64,
    pub config: SessionConfig,
    pub image_count: usize,
    pub next_index: usize,
}

/// One processed image: its sidecar plus where to fetch the rendered files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBody {
    pub sidecar: Sidecar,
    pub original_url: String,
    /// Map kind (`segmentation`, `novelty`, ...) to URL.
    pub map_urls: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResetBody {
    pub session_id: String,
    pub stored_count: usize,
    /// First image index learned by the fresh memory.
    pub memory_epoch_start: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct ServiceMeta {
    created_at: u64,
}

struct Worker {
    session: Session,
    manifest: RunManifest,
}

#[derive(Clone)]
struct Published {
    handle: SessionHandle,
    memory: Arc<MemorySnapshot>,
    results: BTreeMap<usize, Arc<Sidecar>>,
}

struct SessionSlot {
    dir: SessionDir,
    worker: Arc<tokio::sync::Mutex<Worker>>,
    published: RwLock<Published>,
    last_access: Mutex<Instant>,
}

impl SessionSlot {
    fn new(
        worker: Worker,
        dir: SessionDir,
        created_at: u64,
        results: BTreeMap<usize, Arc<Sidecar>>,
    ) -> Self {
        let published = Published {
            handle: SessionHandle {
                id: worker.session.id.clone(),
                created_at,
                config: worker.session.config.clone(),
                image_count: results.len(),
                next_index: worker.session.next_index(),
            },
            memory: Arc::new(worker.session.memory.snapshot()),
            results,
        };
        SessionSlot {
            dir,
            worker: Arc::new(tokio::sync::Mutex::new(worker)),
            published: RwLock::new(published),
            last_access: Mutex::new(Instant::now()),
        }
    }

    fn view(&self) -> Published {
        self.published
            .read()
            .expect("published view poisoned")
            .clone()
    }

    fn publish(&self, f: impl FnOnce(&mut Published)) {
        f(&mut self.published.write().expect("published view poisoned"));
    }

    fn touch(&self) {
        *self.last_access.lock().expect("access clock poisoned") = Instant::now();
    }

    fn idle_for(&self, now: Instant) -> Duration {
        now.saturating_duration_since(*self.last_access.lock().expect("access clock poisoned"))
    }
}

struct Inner {
    config: ServiceConfig,
    root: PathBuf,
    _scratch: Option<tempfile::TempDir>,
    sessions: RwLock<HashMap<String, Arc<SessionSlot>>>,
}

/// Shared service state; cheap to clone.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn join_error(e: tokio::task::JoinError) -> ApiError {
    ApiError::Internal(format!("worker task failed: {e}"))
}

/// Applies the keys of a JSON object onto `base`, rejecting unknown keys.
pub fn merge_config(base: &SessionConfig, overrides: &Value) -> Result<SessionConfig, ApiError> {
    let Value::Object(patch) = overrides else {
        return Err(ApiError::MalformedConfig("expected a JSON object".into()));
    };
    let mut merged = serde_json::to_value(base).map_err(|e| ApiError::Internal(e.to_string()))?;
    let obj = merged
        .as_object_mut()
        .expect("config serializes to an object");
    for (k, v) in patch {
        if !obj.contains_key(k) {
            return Err(ApiError::MalformedConfig(format!("unknown field `{k}`")));
        }
        obj.insert(k.clone(), v.clone());
    }
    let config: SessionConfig =
        serde_json::from_value(merged).map_err(|e| ApiError::MalformedConfig(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

fn map_urls(id: &str, sc: &Sidecar) -> BTreeMap<String, String> {
    MapKind::ALL
        .iter()
        .filter(|k| match k {
            MapKind::Segmentation => true,
            MapKind::Novelty => sc.config.mode.includes_novelty(),
            _ => sc.interest.is_some(),
        })
        .map(|k| {
            (
                k.suffix().to_string(),
                format!("/sessions/{id}/maps/{}", k.file_name(sc.image_index)),
            )
        })
        .collect()
}

fn result_body(id: &str, sc: &Sidecar) -> ResultBody {
    ResultBody {
        original_url: format!("/sessions/{id}/images/{:06}.png", sc.image_index),
        map_urls: map_urls(id, sc),
        sidecar: sc.clone(),
    }
}

/// File names served from a session directory: no separators, no dot-dot.
fn safe_file_name(name: &str) -> bool {
    !name.is_empty()
        && !name.starts_with('.')
        && name.ends_with(".png")
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Result<Self, OutputError> {
        let (root, scratch) = match &config.out_root {
            Some(root) => {
                fs::create_dir_all(root).map_err(|source| OutputError::Io {
                    path: root.clone(),
                    source,
                })?;
                (root.clone(), None)
            }
            None => {
                let tmp = tempfile::tempdir().map_err(|source| OutputError::Io {
                    path: std::env::temp_dir(),
                    source,
                })?;
                (tmp.path().to_path_buf(), Some(tmp))
            }
        };
        let sessions = if scratch.is_none() {
            restore_sessions(&root)
        } else {
            HashMap::new()
        };
        Ok(AppState {
            inner: Arc::new(Inner {
                config,
                root,
                _scratch: scratch,
                sessions: RwLock::new(sessions),
            }),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }

    /// Directory holding the session directories.
    pub fn out_root(&self) -> &Path {
        &self.inner.root
    }

    fn slot(&self, id: &str) -> Result<Arc<SessionSlot>, ApiError> {
        let slot = self
            .inner
            .sessions
            .read()
            .expect("session table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::UnknownSession(id.to_string()))?;
        slot.touch();
        Ok(slot)
    }

    pub fn create_session(&self, overrides: &Value) -> Result<SessionHandle, ApiError> {
        let config = merge_config(&SessionConfig::default(), overrides)?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = Session::new(id.clone(), config)?;
        let dir = SessionDir::create(&self.inner.root, &id)?;
        let manifest = RunManifest::new(&session, InputSource::Upload, self.inner.root.clone());
        let created_at = now_ms();
        dir.write_manifest(&manifest)?;
        dir.write_memory(&session.memory.snapshot())?;
        let meta_path = dir.root().join(SERVICE_META);
        let meta = serde_json::to_string(&ServiceMeta { created_at }).expect("plain struct");
        fs::write(&meta_path, meta).map_err(|source| OutputError::Io {
            path: meta_path,
            source,
        })?;

        let slot = SessionSlot::new(
            Worker { session, manifest },
            dir,
            created_at,
            BTreeMap::new(),
        );
        let handle = slot.view().handle;
        log::info!("created session {id}");
        self.inner
            .sessions
            .write()
            .expect("session table poisoned")
            .insert(id, Arc::new(slot));
        Ok(handle)
    }

    pub fn list_sessions(&self) -> Vec<SessionHandle> {
        let mut out: Vec<_> = self
            .inner
            .sessions
            .read()
            .expect("session table poisoned")
            .values()
            .map(|s| s.view().handle)
            .collect();
        out.sort_by(|a, b| (a.created_at, &a.id).cmp(&(b.created_at, &b.id)));
        out
    }

    pub fn session(&self, id: &str) -> Result<SessionHandle, ApiError> {
        Ok(self.slot(id)?.view().handle)
    }

    /// Decodes and processes one upload. Uploads to the same session run one
    /// at a time in lock order; indices are assigned under the lock.
    pub async fn submit(&self, id: &str, bytes: Vec<u8>) -> Result<ResultBody, ApiError> {
        let slot = self.slot(id)?;
        let limit = self.inner.config.max_upload_bytes;
        if bytes.len() > limit {
            return Err(ApiError::PayloadTooLarge { limit });
        }
        let img = tokio::task::spawn_blocking(move || decode_bytes(&bytes))
            .await
            .map_err(join_error)??;

        let mut worker = slot.worker.clone().lock_owned().await;
        let id = id.to_string();
        tokio::task::spawn_blocking(move || {
            let w = &mut *worker;
            w.session.process_image(&img)?;
            let result = w.session.results.pop().expect("just processed");
            let config = w.session.config.clone();
            write_outputs(&slot.dir, &id, &config, &result, &img)?;

            w.manifest.images.push(ManifestEntry {
                image_index: result.image_index,
                source: "upload".into(),
            });
            w.manifest.next_index = w.session.next_index();
            w.manifest.config = config.clone();
            let snapshot = w.session.memory.snapshot();
            slot.dir.write_manifest(&w.manifest)?;
            slot.dir.write_memory(&snapshot)?;

            let sidecar = Arc::new(Sidecar::from_result(&id, &config, &result));
            let body = result_body(&id, &sidecar);
            let next_index = w.session.next_index();
            slot.publish(|p| {
                p.results.insert(result.image_index, sidecar);
                p.memory = Arc::new(snapshot);
                p.handle.image_count = p.results.len();
                p.handle.next_index = next_index;
            });
            Ok(body)
        })
        .await
        .map_err(join_error)?
    }

    pub async fn reset(&self, id: &str) -> Result<ResetBody, ApiError> {
        let slot = self.slot(id)?;
        let mut worker = slot.worker.clone().lock_owned().await;
        worker.session.reset_memory();
        let snapshot = worker.session.memory.snapshot();
        slot.dir.write_memory(&snapshot)?;
        let body = ResetBody {
            session_id: id.to_string(),
            stored_count: snapshot.stored_count,
            memory_epoch_start: worker.session.memory_epoch_start(),
        };
        slot.publish(|p| p.memory = Arc::new(snapshot));
        log::info!("reset memory of session {id}");
        Ok(body)
    }

    /// Changes the configuration of a live session; memory is kept.
    pub async fn update_config(
        &self,
        id: &str,
        overrides: &Value,
    ) -> Result<SessionHandle, ApiError> {
        let slot = self.slot(id)?;
        let mut worker = slot.worker.clone().lock_owned().await;
        let config = merge_config(&worker.session.config, overrides)?;
        log::info!("session {id}: config changed mid-session to {config:?}");
        worker.session.config = config.clone();
        worker.manifest.config = config.clone();
        slot.dir.write_manifest(&worker.manifest)?;
        slot.publish(|p| p.handle.config = config);
        Ok(slot.view().handle)
    }

    pub fn memory(&self, id: &str) -> Result<Arc<MemorySnapshot>, ApiError> {
        Ok(self.slot(id)?.view().memory)
    }

    pub fn result(&self, id: &str, index: usize) -> Result<ResultBody, ApiError> {
        let view = self.slot(id)?.view();
        let sc = view
            .results
            .get(&index)
            .ok_or_else(|| ApiError::UnknownResult {
                session: id.to_string(),
                index,
            })?;
        Ok(result_body(id, sc))
    }

    pub fn summary(&self, id: &str) -> Result<SessionSummary, ApiError> {
        let view = self.slot(id)?.view();
        Ok(summarize_sidecars(
            id,
            view.results.values().map(|s| s.as_ref()),
            view.memory.stored_count,
        ))
    }

    /// Path of a rendered map (`maps`) or stored original (`images`).
    pub fn file_path(&self, id: &str, sub: &str, name: &str) -> Result<PathBuf, ApiError> {
        let slot = self.slot(id)?;
        if !safe_file_name(name) {
            return Err(ApiError::UnknownFile(name.to_string()));
        }
        let dir = match sub {
            "maps" => slot.dir.maps_dir(),
            "images" => slot.dir.images_dir(),
            _ => return Err(ApiError::UnknownFile(name.to_string())),
        };
        Ok(dir.join(name))
    }

    /// Drops sessions idle longer than the TTL. A session with work in
    /// flight is never dropped. Returns the removed ids.
    pub fn sweep_expired(&self, now: Instant) -> Vec<String> {
        let Some(ttl) = self.inner.config.idle_ttl else {
            return Vec::new();
        };
        let mut table = self.inner.sessions.write().expect("session table poisoned");
        let expired: Vec<String> = table
            .iter()
            .filter(|(_, s)| s.idle_for(now) >= ttl && s.worker.try_lock().is_ok())
            .map(|(id, _)| id.clone())
            .collect();
        for id in &expired {
            table.remove(id);
            log::info!("session {id} expired after {ttl:?} idle");
        }
        expired
    }
}

fn restore_sessions(root: &Path) -> HashMap<String, Arc<SessionSlot>> {
    let mut out = HashMap::new();
    let Ok(entries) = fs::read_dir(root) else {
        return out;
    };
    for entry in entries.flatten() {
        let path = entry.path();
        if !path.join("manifest.json").is_file() {
            continue;
        }
        match restore_one(&path) {
            Ok(slot) => {
                let id = slot.view().handle.id;
                log::info!("restored session {id}");
                out.insert(id, Arc::new(slot));
            }
            Err(e) => log::warn!("cannot restore {}: {e}", path.display()),
        }
    }
    out
}

fn restore_one(path: &Path) -> Result<SessionSlot, OutputError> {
    let dir = SessionDir::open(path);
    let (mut session, manifest) = load_session(&dir)?;
    session.results.clear();
    let mut results = BTreeMap::new();
    for entry in &manifest.images {
        let sc = dir.read_sidecar(entry.image_index)?;
        results.insert(entry.image_index, Arc::new(sc));
    }
    let created_at = fs::read_to_string(path.join(SERVICE_META))
        .ok()
        .and_then(|t| serde_json::from_str::<ServiceMeta>(&t).ok())
        .map(|m| m.created_at)
        .unwrap_or_else(now_ms);
    Ok(SessionSlot::new(
        Worker { session, manifest },
        dir,
        created_at,
        results,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn merge_applies_known_fields_only() {
        let base = SessionConfig::default();
        let c = merge_config(&base, &json!({"theta_deg": 7.5, "mode": "interest"})).unwrap();
        assert_eq!(c.theta_deg, 7.5);
        assert_eq!(c.k_points, 3);
        assert!(matches!(
            merge_config(&base, &json!({"theta": 7.5})),
            Err(ApiError::MalformedConfig(_))
        ));
        match merge_config(&base, &json!({"theta_deg": -1.0})) {
            Err(ApiError::InvalidConfig(e)) => assert_eq!(e.field, "theta_deg"),
            other => panic!("{other:?}"),
        }
        assert!(merge_config(&base, &json!([1, 2])).is_err());
    }

    #[test]
    fn file_names_are_confined() {
        assert!(safe_file_name("000001_novelty.png"));
        for bad in ["../memory.json", "a/b.png", ".hidden.png", "x.json", ""] {
            assert!(!safe_file_name(bad), "{bad}");
        }
    }
}
