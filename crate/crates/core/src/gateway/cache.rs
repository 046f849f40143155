use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::GatewayError;
use crate::corpus::sha256_hex;

/// One recorded exchange. `key` is the digest of the canonical form of
/// `request`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub request: Value,
    /// Reply text extracted from the response.
    pub response: String,
    /// Response body as received.
    pub raw: Value,
    /// Seconds since the Unix epoch at recording time.
    pub timestamp: u64,
}

/// Compact JSON with lexicographically sorted object keys.
pub fn canonical_json(value: &Value) -> String {
    // serde_json's default map is ordered, so a round trip through Value sorts
    // every object.
    let sorted: Value = serde_json::from_str(&value.to_string()).expect("valid json");
    sorted.to_string()
}

pub fn cache_key(request: &Value) -> String {
    sha256_hex(canonical_json(request).as_bytes())
}

/// Flat directory of `<key>.json` entries.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ResponseCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_of(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<CacheEntry>, GatewayError> {
        let path = self.path_of(key);
        let text = match fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(GatewayError::Cache(format!("{}: {e}", path.display()))),
        };
        let entry: CacheEntry = serde_json::from_str(&text)
            .map_err(|e| GatewayError::Cache(format!("{}: {e}", path.display())))?;
        if entry.key != key || cache_key(&entry.request) != key {
            return Err(GatewayError::Cache(format!(
                "{}: stored request does not hash to its key",
                path.display()
            )));
        }
        Ok(Some(entry))
    }

    /// Writes an entry via a temporary file and rename, so readers never see a
    /// partial file.
    pub fn put(&self, request: Value, response: String, raw: Value) -> Result<CacheEntry, GatewayError> {
        let key = cache_key(&request);
        let entry = CacheEntry {
            key: key.clone(),
            request,
            response,
            raw,
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        };
        let fail = |e: std::io::Error| GatewayError::Cache(format!("{}: {e}", self.dir.display()));
        fs::create_dir_all(&self.dir).map_err(fail)?;
        let tmp = self.dir.join(format!(
            ".{key}.{}.{}.tmp",
            std::process::id(),
            TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let mut text = serde_json::to_string_pretty(&entry).expect("entry serializes");
        text.push('\n');
        let mut file = fs::File::create(&tmp).map_err(fail)?;
        file.write_all(text.as_bytes()).map_err(fail)?;
        file.sync_all().map_err(fail)?;
        drop(file);
        fs::rename(&tmp, self.path_of(&key)).map_err(fail)?;
        Ok(entry)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn canonical_json_sorts_and_compacts() {
        let a = json!({"b": 1, "a": {"d": [1, 2], "c": "x"}});
        assert_eq!(canonical_json(&a), r#"{"a":{"c":"x","d":[1,2]},"b":1}"#);
    }

    #[test]
    fn round_trip_and_key_check() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path().join("c"));
        let req = json!({"endpoint_id": "e", "messages": []});
        let entry = cache.put(req.clone(), "yes".into(), json!({})).unwrap();
        assert_eq!(entry.key, cache_key(&req));
        assert_eq!(cache.get(&entry.key).unwrap().unwrap(), entry);
        assert!(cache.get("0000").unwrap().is_none());

        let mut tampered = entry.clone();
        tampered.request = json!({"endpoint_id": "other"});
        fs::write(cache.path_of(&entry.key), serde_json::to_string(&tampered).unwrap()).unwrap();
        assert!(cache.get(&entry.key).is_err());
        let leftovers: Vec<_> = fs::read_dir(cache.dir())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }
}
