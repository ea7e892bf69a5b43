//! Append-only JSONL classification cache.
//!
//! One record per line, keyed by a SHA-256 hash over (canonical pair,
//! vintage year, template version). Replaying a line with an existing key is
//! idempotent: the latest line wins on load, and appends of identical
//! content only grow the file.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{RelationError, RelationLabel};
use crate::StockId;

/// Cache key for a (pair, vintage year, template version) triple. The pair
/// is sorted before hashing so orientation cannot split entries.
pub fn cache_key(a: &str, b: &str, year: i32, template_version: &str) -> String {
    let (i, j) = if a <= b { (a, b) } else { (b, a) };
    let mut hasher = Sha256::new();
    hasher.update(i.as_bytes());
    hasher.update([0x1f]);
    hasher.update(j.as_bytes());
    hasher.update([0x1f]);
    hasher.update(year.to_string().as_bytes());
    hasher.update([0x1f]);
    hasher.update(template_version.as_bytes());
    hex::encode(hasher.finalize())
}

/// One cached classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key: String,
    pub pair: (StockId, StockId),
    pub year: i32,
    pub template_version: String,
    pub label: RelationLabel,
    pub evidence_a: String,
    pub evidence_b: String,
    pub timestamp: String,
}

/// In-memory key → record map, optionally backed by a JSONL file that every
/// insert appends to.
pub struct ClassificationCache {
    path: Option<PathBuf>,
    writer: Option<File>,
    map: HashMap<String, CacheRecord>,
}

impl ClassificationCache {
    /// Cache with no file backing.
    pub fn in_memory() -> Self {
        Self {
            path: None,
            writer: None,
            map: HashMap::new(),
        }
    }

    /// Open (or create) a file-backed cache, loading any existing records.
    pub fn open(path: &Path) -> Result<Self, RelationError> {
        let mut map = HashMap::new();
        if path.is_file() {
            let file = File::open(path).map_err(|source| RelationError::Io {
                path: path.display().to_string(),
                source,
            })?;
            for (line_no, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|source| RelationError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: CacheRecord = serde_json::from_str(&line)
                    .map_err(|source| RelationError::BadCacheLine {
                        line: line_no + 1,
                        source,
                    })?;
                map.insert(record.key.clone(), record);
            }
        } else if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(|source| RelationError::Io {
                    path: parent.display().to_string(),
                    source,
                })?;
            }
        }
        let writer = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|source| RelationError::Io {
                path: path.display().to_string(),
                source,
            })?;
        Ok(Self {
            path: Some(path.to_path_buf()),
            writer: Some(writer),
            map,
        })
    }

    pub fn get(&self, key: &str) -> Option<&CacheRecord> {
        self.map.get(key)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Insert a record, appending it to the backing file if any.
    pub fn put(&mut self, record: CacheRecord) -> Result<(), RelationError> {
        if let Some(writer) = &mut self.writer {
            let line = serde_json::to_string(&record).expect("record serializes");
            writeln!(writer, "{line}").map_err(|source| RelationError::Io {
                path: self
                    .path
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default(),
                source,
            })?;
        }
        self.map.insert(record.key.clone(), record);
        Ok(())
    }
}
