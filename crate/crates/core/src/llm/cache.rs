use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ChatRequest, LlmError, Message};

/// The fields that identify a request, in a fixed order. `max_tokens` is
/// deliberately left out.
#[derive(Serialize)]
struct DigestKey<'a> {
    messages: &'a [Message],
    model: &'a str,
    temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

/// Hex SHA-256 over the canonical JSON of (messages, model, temperature),
/// plus the sampling seed when one is set.
pub fn request_digest(request: &ChatRequest) -> String {
    let key = DigestKey {
        messages: &request.messages,
        model: &request.model,
        temperature: request.temperature,
        seed: request.seed,
    };
    let bytes = serde_json::to_vec(&key).expect("digest key always serializes");
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub digest: String,
    pub request: ChatRequest,
    pub response: String,
    /// Seconds since the Unix epoch when the response was recorded.
    pub timestamp: u64,
}

impl CacheEntry {
    pub fn new(digest: String, request: ChatRequest, response: String) -> Self {
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        CacheEntry { digest, request, response, timestamp }
    }
}

/// One JSON file per request digest.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, LlmError> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir).map_err(|e| LlmError::Cache { path: dir.clone(), message: e.to_string() })?;
        Ok(ResponseCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, digest: &str) -> PathBuf {
        self.dir.join(format!("{digest}.json"))
    }

    pub fn get(&self, digest: &str) -> Result<Option<CacheEntry>, LlmError> {
        let path = self.path_for(digest);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(LlmError::Cache { path, message: e.to_string() }),
        };
        serde_json::from_str(&text).map(Some).map_err(|e| LlmError::Cache { path, message: e.to_string() })
    }

    /// Writes to a temporary file in the cache directory, then renames it
    /// into place so concurrent readers never see a partial entry.
    pub fn put(&self, entry: &CacheEntry) -> Result<(), LlmError> {
        let path = self.path_for(&entry.digest);
        let err = |message: String| LlmError::Cache { path: path.clone(), message };
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(|e| err(e.to_string()))?;
        let json = serde_json::to_string_pretty(entry).map_err(|e| err(e.to_string()))?;
        tmp.write_all(json.as_bytes()).map_err(|e| err(e.to_string()))?;
        tmp.write_all(b"\n").map_err(|e| err(e.to_string()))?;
        tmp.persist(&path).map_err(|e| err(e.to_string()))?;
        Ok(())
    }

    pub fn entries(&self) -> Result<Vec<PathBuf>, LlmError> {
        let read = std::fs::read_dir(&self.dir).map_err(|e| LlmError::Cache { path: self.dir.clone(), message: e.to_string() })?;
        let mut out: Vec<PathBuf> = read
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        out.sort();
        Ok(out)
    }

    /// Checks every entry: it parses, its file name and `digest` field agree,
    /// and the digest recomputed from the stored request matches. Returns the
    /// number of entries checked and a description of each problem found.
    pub fn verify(&self) -> Result<(usize, Vec<String>), LlmError> {
        let mut problems = Vec::new();
        let paths = self.entries()?;
        for path in &paths {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let entry: CacheEntry = match std::fs::read_to_string(path)
                .map_err(|e| e.to_string())
                .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()))
            {
                Ok(e) => e,
                Err(e) => {
                    problems.push(format!("{}: unreadable: {e}", path.display()));
                    continue;
                }
            };
            let recomputed = request_digest(&entry.request);
            if entry.digest != stem {
                problems.push(format!("{}: digest field {} does not match file name", path.display(), entry.digest));
            }
            if recomputed != entry.digest {
                problems.push(format!("{}: request hashes to {recomputed}", path.display()));
            }
        }
        Ok((paths.len(), problems))
    }
}
