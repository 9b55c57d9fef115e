//! Request/response transcript archive.
//!
//! When archiving is enabled every client call contributes one record with
//! the service name and both payloads. Records are buffered and written
//! sorted by content at finalize time, so two identically seeded runs
//! produce byte-identical archives regardless of task interleaving; the
//! transcript is sufficient to replay a pipeline run offline.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

#[derive(Debug)]
pub struct ArchiveWriter {
    path: PathBuf,
    records: Mutex<Vec<(String, String, String)>>,
}

impl ArchiveWriter {
    pub fn new(path: &Path) -> Self {
        Self {
            path: path.to_path_buf(),
            records: Mutex::new(Vec::new()),
        }
    }

    pub fn record(&self, service: &str, request: serde_json::Value, response: serde_json::Value) {
        if let Ok(mut records) = self.records.lock() {
            records.push((
                service.to_string(),
                request.to_string(),
                response.to_string(),
            ));
        }
    }

    /// Sort the buffered transcript by content and write it out as JSONL.
    pub fn finalize(&self) -> std::io::Result<()> {
        let mut records = match self.records.lock() {
            Ok(mut r) => std::mem::take(&mut *r),
            Err(_) => return Ok(()),
        };
        records.sort();
        if let Some(dir) = self.path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut file = std::io::BufWriter::new(std::fs::File::create(&self.path)?);
        for (seq, (service, request, response)) in records.iter().enumerate() {
            // request/response are already serialized JSON; embed them raw.
            writeln!(
                file,
                r#"{{"seq":{seq},"service":{},"request":{request},"response":{response}}}"#,
                serde_json::Value::String(service.clone())
            )?;
        }
        file.flush()
    }
}
