//! Line-delimited JSON persistence: one record per line, schema-validated on
//! read with line-numbered errors, atomic writes via temp file + rename.

use serde::de::DeserializeOwned;
use serde::Serialize;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Schema {
        path: String,
        line: usize,
        message: String,
    },
}

impl StoreError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        StoreError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    fn schema(path: &Path, line: usize, message: impl Into<String>) -> Self {
        StoreError::Schema {
            path: path.display().to_string(),
            line,
            message: message.into(),
        }
    }
}

/// Record-level invariants checked on read, beyond what serde enforces.
pub trait Validate {
    fn validate(&self) -> Result<(), String>;
}

/// Read a JSONL file into validated records. Errors cite the 1-based line.
pub fn read_jsonl<T: DeserializeOwned + Validate>(path: &Path) -> Result<Vec<T>, StoreError> {
    let file = std::fs::File::open(path).map_err(|e| StoreError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| StoreError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line)
            .map_err(|e| StoreError::schema(path, i + 1, e.to_string()))?;
        record
            .validate()
            .map_err(|m| StoreError::schema(path, i + 1, m))?;
        out.push(record);
    }
    Ok(out)
}

/// Write records as JSONL atomically: serialize to a temp file in the target
/// directory, then rename into place.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), StoreError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| StoreError::io(path, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| StoreError::io(path, e))?;
    for r in records {
        let line = serde_json::to_string(r)
            .map_err(|e| StoreError::schema(path, 0, format!("serialize: {e}")))?;
        tmp.write_all(line.as_bytes())
            .map_err(|e| StoreError::io(path, e))?;
        tmp.write_all(b"\n").map_err(|e| StoreError::io(path, e))?;
    }
    tmp.persist(path)
        .map_err(|e| StoreError::io(path, e.error))?;
    Ok(())
}
