//! Append-only response cache, keyed by a content hash of the full request.
//!
//! On disk the cache is JSON-lines, one `{"key": <hex>, "value": <text>}`
//! object per line, so warm reruns replay recorded responses without any
//! HTTP traffic. A key maps to exactly one value for the lifetime of a run.

use super::OracleError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

#[derive(Serialize, Deserialize)]
struct CacheLine {
    key: String,
    value: String,
}

struct CacheInner {
    map: HashMap<String, String>,
    file: Option<File>,
}

pub struct ResponseCache {
    inner: Mutex<CacheInner>,
}

impl ResponseCache {
    /// A cache that lives only for this run.
    pub fn in_memory() -> Self {
        ResponseCache {
            inner: Mutex::new(CacheInner {
                map: HashMap::new(),
                file: None,
            }),
        }
    }

    /// Open (or create) a cache file, loading all existing entries.
    pub fn open(path: &Path) -> Result<Self, OracleError> {
        let mut map = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(|e| OracleError::Cache {
                path: path.display().to_string(),
                message: e.to_string(),
            })?);
            for (lineno, line) in reader.lines().enumerate() {
                let line = line.map_err(|e| OracleError::Cache {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: CacheLine =
                    serde_json::from_str(&line).map_err(|e| OracleError::Cache {
                        path: path.display().to_string(),
                        message: format!("line {}: {e}", lineno + 1),
                    })?;
                // first write wins; the file is append-only
                map.entry(entry.key).or_insert(entry.value);
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| OracleError::Cache {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        Ok(ResponseCache {
            inner: Mutex::new(CacheInner {
                map,
                file: Some(file),
            }),
        })
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.inner.lock().unwrap().map.get(key).cloned()
    }

    pub fn put(&self, key: &str, value: &str) -> Result<(), OracleError> {
        let mut inner = self.inner.lock().unwrap();
        if inner.map.contains_key(key) {
            return Ok(());
        }
        inner.map.insert(key.to_string(), value.to_string());
        if let Some(file) = inner.file.as_mut() {
            let line = serde_json::to_string(&CacheLine {
                key: key.to_string(),
                value: value.to_string(),
            })
            .expect("cache lines serialize");
            writeln!(file, "{line}")
                .and_then(|()| file.flush())
                .map_err(|e| OracleError::Cache {
                    path: "<cache file>".to_string(),
                    message: e.to_string(),
                })?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Content hash identifying one generation request. Any change to the
/// model name, sampling settings or prompt yields a fresh key.
pub fn cache_key(
    model_name: &str,
    seed: i64,
    temperature: f64,
    num_predict: i64,
    prompt: &str,
) -> String {
    let canonical = serde_json::json!({
        "model": model_name,
        "seed": seed,
        "temperature": temperature,
        "num_predict": num_predict,
        "prompt": prompt,
    });
    let mut hasher = Sha256::new();
    hasher.update(canonical.to_string().as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_are_stable_and_sensitive() {
        let a = cache_key("m", 42, 0.0, 256, "hello");
        assert_eq!(a, cache_key("m", 42, 0.0, 256, "hello"));
        assert_ne!(a, cache_key("m", 43, 0.0, 256, "hello"));
        assert_ne!(a, cache_key("m", 42, 0.0, 256, "hello "));
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn file_cache_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        {
            let cache = ResponseCache::open(&path).unwrap();
            cache.put("k1", "v1").unwrap();
            cache.put("k2", "v2").unwrap();
            // duplicate put is a no-op
            cache.put("k1", "other").unwrap();
        }
        let cache = ResponseCache::open(&path).unwrap();
        assert_eq!(cache.get("k1").as_deref(), Some("v1"));
        assert_eq!(cache.get("k2").as_deref(), Some("v2"));
        assert_eq!(cache.len(), 2);
    }
}
