//! On-disk pod store.
//!
//! ```text
//! <root>/manifest.json
//! <root>/pods/<pod_id>/pod.mpod
//! <root>/pods/<pod_id>/summary.json   (written on first summary request)
//! ```
//!
//! The manifest is only ever replaced by writing `manifest.json.tmp` and
//! renaming it over the old file, so a crash leaves either the old or the new
//! manifest, never a torn one.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use memorypod::narrative::Summary;
use memorypod::pod::codec::{decode_pod, CodecError};
use memorypod::MemoryPod;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const MANIFEST: &str = "manifest.json";
const MANIFEST_TMP: &str = "manifest.json.tmp";
const POD_FILE: &str = "pod.mpod";
const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("not an MPOD file: {0}")]
    Decode(CodecError),
    #[error("storage failure: {0}")]
    Io(#[from] io::Error),
    #[error("manifest is corrupt: {0}")]
    CorruptManifest(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the store root.
    pub path: String,
    pub title: String,
    pub created_at: String,
    pub duration_us: u64,
    pub annotation_count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub pods: BTreeMap<String, ManifestEntry>,
}

pub struct PodStore {
    root: PathBuf,
    manifest: RwLock<Manifest>,
    // uploads are serialized through this lock
    writer: Mutex<()>,
    decoded: RwLock<HashMap<String, Arc<MemoryPod>>>,
}

impl PodStore {
    /// Opens (or initializes) a store. Entries whose file is missing or no
    /// longer decodes are dropped from the in-memory manifest with a warning.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(root.join("pods"))?;
        let _ = fs::remove_file(root.join(MANIFEST_TMP));
        let mut manifest = match fs::read(root.join(MANIFEST)) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| StoreError::CorruptManifest(e.to_string()))?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Manifest::default(),
            Err(e) => return Err(e.into()),
        };
        let mut decoded = HashMap::new();
        manifest.pods.retain(|id, entry| match fs::read(root.join(&entry.path)).map(|b| decode_pod(&b)) {
            Ok(Ok(pod)) => {
                decoded.insert(id.clone(), Arc::new(pod));
                true
            }
            _ => {
                tracing::warn!(pod_id = %id, path = %entry.path, "dropping unreadable manifest entry");
                false
            }
        });
        Ok(PodStore { root, manifest: RwLock::new(manifest), writer: Mutex::new(()), decoded: RwLock::new(decoded) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Decodes and validates `bytes`, then stores them verbatim under a fresh
    /// id.
    pub fn insert(&self, bytes: &[u8]) -> Result<String, StoreError> {
        let pod = decode_pod(bytes).map_err(StoreError::Decode)?;
        let _guard = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let id = uuid::Uuid::new_v4().to_string();
        let rel = format!("pods/{id}/{POD_FILE}");
        let dir = self.root.join("pods").join(&id);
        fs::create_dir_all(&dir)?;
        write_synced(&dir.join(POD_FILE), bytes)?;

        let mut next = self.manifest().clone();
        next.pods.insert(
            id.clone(),
            ManifestEntry {
                path: rel,
                title: pod.title.clone(),
                created_at: pod.created_at.clone(),
                duration_us: pod.duration().as_micros(),
                annotation_count: pod.annotations.len(),
            },
        );
        let staged = self.stage_manifest(&next)?;
        self.commit_manifest(staged)?;
        *self.manifest.write().unwrap_or_else(|e| e.into_inner()) = next;
        self.decoded.write().unwrap_or_else(|e| e.into_inner()).insert(id.clone(), Arc::new(pod));
        Ok(id)
    }

    /// First half of a manifest update: writes the temp file.
    pub fn stage_manifest(&self, manifest: &Manifest) -> Result<PathBuf, StoreError> {
        let tmp = self.root.join(MANIFEST_TMP);
        let json = serde_json::to_vec_pretty(manifest).map_err(|e| StoreError::CorruptManifest(e.to_string()))?;
        write_synced(&tmp, &json)?;
        Ok(tmp)
    }

    /// Second half: atomically replaces the manifest with the staged file.
    pub fn commit_manifest(&self, staged: PathBuf) -> Result<(), StoreError> {
        fs::rename(staged, self.root.join(MANIFEST))?;
        Ok(())
    }

    pub fn manifest(&self) -> std::sync::RwLockReadGuard<'_, Manifest> {
        self.manifest.read().unwrap_or_else(|e| e.into_inner())
    }

    pub fn entry(&self, id: &str) -> Option<ManifestEntry> {
        self.manifest().pods.get(id).cloned()
    }

    pub fn pod(&self, id: &str) -> Option<Arc<MemoryPod>> {
        self.decoded.read().unwrap_or_else(|e| e.into_inner()).get(id).cloned()
    }

    pub fn file(&self, id: &str) -> Result<Option<Vec<u8>>, StoreError> {
        match self.entry(id) {
            Some(e) => Ok(Some(fs::read(self.root.join(e.path))?)),
            None => Ok(None),
        }
    }

    fn summary_path(&self, id: &str) -> PathBuf {
        self.root.join("pods").join(id).join(SUMMARY_FILE)
    }

    pub fn cached_summary(&self, id: &str) -> Option<Summary> {
        let bytes = fs::read(self.summary_path(id)).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    pub fn store_summary(&self, id: &str, summary: &Summary) -> Result<(), StoreError> {
        let path = self.summary_path(id);
        let tmp = path.with_extension("json.tmp");
        let json = serde_json::to_vec_pretty(summary).map_err(|e| StoreError::CorruptManifest(e.to_string()))?;
        write_synced(&tmp, &json)?;
        fs::rename(tmp, path)?;
        Ok(())
    }
}

fn write_synced(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    f.sync_all()
}
