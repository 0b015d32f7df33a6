//! Persona-embedding cache.
//!
//! Embeddings are keyed by a stable hash of the sentence text and stamped
//! with the backend fingerprint (checkpoint id + dimension); a cache loaded
//! for a different backend is discarded rather than reused. Insertion is
//! mutex-guarded so scorers can share one cache across threads.

use super::backend::SimilarityModel;
use crate::error::{Error, Result};
use crate::text::fnv1a;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

#[derive(Debug, Serialize, Deserialize)]
struct CacheFile {
    backend_fingerprint: String,
    entries: BTreeMap<String, Vec<f64>>,
}

pub struct EmbeddingCache {
    backend_fingerprint: String,
    entries: Mutex<BTreeMap<u64, Vec<f64>>>,
    enabled: bool,
}

pub fn backend_fingerprint(backend: &dyn SimilarityModel) -> String {
    format!("{}:{}", backend.checkpoint_id(), backend.embedding_dim())
}

impl EmbeddingCache {
    pub fn for_backend(backend: &dyn SimilarityModel) -> Self {
        EmbeddingCache {
            backend_fingerprint: backend_fingerprint(backend),
            entries: Mutex::new(BTreeMap::new()),
            enabled: true,
        }
    }

    /// A cache that stores nothing; embeds go straight to the backend.
    pub fn disabled(backend: &dyn SimilarityModel) -> Self {
        EmbeddingCache {
            backend_fingerprint: backend_fingerprint(backend),
            entries: Mutex::new(BTreeMap::new()),
            enabled: false,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Embed through the cache. Cached vectors are returned verbatim, so hits
    /// are bit-identical to the original computation.
    pub fn embed(&self, backend: &dyn SimilarityModel, text: &str) -> Result<Vec<f64>> {
        if !self.enabled {
            return backend.embed(text);
        }
        let fp = backend_fingerprint(backend);
        if fp != self.backend_fingerprint {
            return Err(Error::Lifecycle(format!(
                "embedding cache built for '{}' used with '{}'",
                self.backend_fingerprint, fp
            )));
        }
        let key = fnv1a(text.as_bytes());
        if let Some(hit) = self.entries.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let vector = backend.embed(text)?;
        self.entries
            .lock()
            .expect("cache lock")
            .insert(key, vector.clone());
        Ok(vector)
    }

    /// Writes the cache as JSON: `{backend_fingerprint, entries: {hash: vec}}`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let entries = self
            .entries
            .lock()
            .expect("cache lock")
            .iter()
            .map(|(k, v)| (format!("{k:016x}"), v.clone()))
            .collect();
        let file = CacheFile {
            backend_fingerprint: self.backend_fingerprint.clone(),
            entries,
        };
        let json = serde_json::to_string(&file)?;
        std::fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// Loads a cache for `backend`. A fingerprint mismatch yields an empty
    /// cache (stale entries are never served), reported via the return flag.
    pub fn load(path: &Path, backend: &dyn SimilarityModel) -> Result<(Self, bool)> {
        let json =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let file: CacheFile = serde_json::from_str(&json)?;
        let fresh = EmbeddingCache::for_backend(backend);
        if file.backend_fingerprint != fresh.backend_fingerprint {
            tracing::warn!(
                "embedding cache fingerprint mismatch ({} vs {}); invalidating",
                file.backend_fingerprint,
                fresh.backend_fingerprint
            );
            return Ok((fresh, false));
        }
        {
            let mut entries = fresh.entries.lock().expect("cache lock");
            for (k, v) in file.entries {
                let key = u64::from_str_radix(&k, 16)
                    .map_err(|_| Error::Serde(format!("bad cache key '{k}'")))?;
                entries.insert(key, v);
            }
        }
        Ok((fresh, true))
    }
}
