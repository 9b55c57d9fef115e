//! Service traits the engine consumes, call metadata, and the retry wrapper.

use crate::endpoint::ClientError;
use crate::wire::{DecodeParams, DetectRequest};
use async_trait::async_trait;
use std::sync::Arc;
use std::time::Duration;
use vigil_core::geometry::Detection;

/// Per-call metadata: how many retries it took and how long it ran.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CallMeta {
    pub retries: u32,
    pub latency_ms: u64,
}

/// Raw generator output.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub text: String,
    pub meta: CallMeta,
}

/// Validated detector output. Entries that failed the detection invariants
/// were dropped and counted, never silently truncated.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectOutcome {
    /// `(query index, detection)` pairs, query provenance retained.
    pub detections: Vec<(usize, Detection)>,
    pub dropped: usize,
    pub meta: CallMeta,
}

/// Client-side normalized embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbedOutcome {
    pub embedding: Vec<f64>,
    pub meta: CallMeta,
}

#[async_trait]
pub trait VlmApi: Send + Sync {
    async fn generate(
        &self,
        media: &str,
        prompt: &str,
        params: &DecodeParams,
    ) -> Result<Generated, ClientError>;
}

#[async_trait]
pub trait DetectorApi: Send + Sync {
    async fn detect(&self, request: &DetectRequest) -> Result<DetectOutcome, ClientError>;
}

#[async_trait]
pub trait EmbedderApi: Send + Sync {
    async fn embed(&self, image: &str) -> Result<EmbedOutcome, ClientError>;
}

#[async_trait]
impl<T: VlmApi + ?Sized> VlmApi for Arc<T> {
    async fn generate(
        &self,
        media: &str,
        prompt: &str,
        params: &DecodeParams,
    ) -> Result<Generated, ClientError> {
        (**self).generate(media, prompt, params).await
    }
}

#[async_trait]
impl<T: DetectorApi + ?Sized> DetectorApi for Arc<T> {
    async fn detect(&self, request: &DetectRequest) -> Result<DetectOutcome, ClientError> {
        (**self).detect(request).await
    }
}

#[async_trait]
impl<T: EmbedderApi + ?Sized> EmbedderApi for Arc<T> {
    async fn embed(&self, image: &str) -> Result<EmbedOutcome, ClientError> {
        (**self).embed(image).await
    }
}

/// The three clients a pipeline run needs.
#[derive(Clone)]
pub struct Clients {
    pub vlm: Arc<dyn VlmApi>,
    pub detector: Arc<dyn DetectorApi>,
    pub embedder: Arc<dyn EmbedderApi>,
}

/// Retry middleware: retries transport failures with exponential backoff and
/// stamps the retry count into the call metadata. Protocol and domain errors
/// pass through immediately.
pub struct WithRetry<T> {
    inner: T,
    max_retries: u32,
    backoff: Duration,
}

impl<T> WithRetry<T> {
    pub fn new(inner: T, max_retries: u32, backoff: Duration) -> Self {
        Self {
            inner,
            max_retries,
            backoff,
        }
    }

    async fn run<R, F, Fut>(&self, mut op: F) -> Result<(R, u32), ClientError>
    where
        F: FnMut() -> Fut,
        Fut: std::future::Future<Output = Result<R, ClientError>>,
    {
        let mut attempt = 0u32;
        loop {
            match op().await {
                Ok(value) => return Ok((value, attempt)),
                Err(e) if e.is_retryable() && attempt < self.max_retries => {
                    let delay = self.backoff * 2u32.saturating_pow(attempt);
                    attempt += 1;
                    log::warn!("retrying after transport failure (attempt {attempt}): {e}");
                    tokio::time::sleep(delay).await;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

#[async_trait]
impl<T: VlmApi> VlmApi for WithRetry<T> {
    async fn generate(
        &self,
        media: &str,
        prompt: &str,
        params: &DecodeParams,
    ) -> Result<Generated, ClientError> {
        let (mut out, retries) = self
            .run(|| self.inner.generate(media, prompt, params))
            .await?;
        out.meta.retries = retries;
        Ok(out)
    }
}

#[async_trait]
impl<T: DetectorApi> DetectorApi for WithRetry<T> {
    async fn detect(&self, request: &DetectRequest) -> Result<DetectOutcome, ClientError> {
        let (mut out, retries) = self.run(|| self.inner.detect(request)).await?;
        out.meta.retries = retries;
        Ok(out)
    }
}

#[async_trait]
impl<T: EmbedderApi> EmbedderApi for WithRetry<T> {
    async fn embed(&self, image: &str) -> Result<EmbedOutcome, ClientError> {
        let (mut out, retries) = self.run(|| self.inner.embed(image)).await?;
        out.meta.retries = retries;
        Ok(out)
    }
}

/// Transcript middleware: records one request/response pair per successful
/// call, regardless of whether the inner client is HTTP or in-process.
pub struct WithArchive<T> {
    inner: T,
    archive: std::sync::Arc<crate::archive::ArchiveWriter>,
}

impl<T> WithArchive<T> {
    pub fn new(inner: T, archive: std::sync::Arc<crate::archive::ArchiveWriter>) -> Self {
        Self { inner, archive }
    }
}

#[async_trait]
impl<T: VlmApi> VlmApi for WithArchive<T> {
    async fn generate(
        &self,
        media: &str,
        prompt: &str,
        params: &DecodeParams,
    ) -> Result<Generated, ClientError> {
        let out = self.inner.generate(media, prompt, params).await?;
        self.archive.record(
            "generate",
            serde_json::json!({ "media": media, "prompt": prompt, "params": params }),
            serde_json::json!({ "text": out.text }),
        );
        Ok(out)
    }
}

#[async_trait]
impl<T: DetectorApi> DetectorApi for WithArchive<T> {
    async fn detect(&self, request: &DetectRequest) -> Result<DetectOutcome, ClientError> {
        let out = self.inner.detect(request).await?;
        let detections: Vec<serde_json::Value> = out
            .detections
            .iter()
            .map(|(query_index, d)| {
                serde_json::json!({
                    "label": d.label,
                    "box": [d.bbox.x1, d.bbox.y1, d.bbox.x2, d.bbox.y2],
                    "confidence": d.confidence,
                    "query_index": query_index,
                })
            })
            .collect();
        self.archive.record(
            "detect",
            serde_json::to_value(request).unwrap_or(serde_json::Value::Null),
            serde_json::json!({ "detections": detections, "dropped": out.dropped }),
        );
        Ok(out)
    }
}

#[async_trait]
impl<T: EmbedderApi> EmbedderApi for WithArchive<T> {
    async fn embed(&self, image: &str) -> Result<EmbedOutcome, ClientError> {
        let out = self.inner.embed(image).await?;
        self.archive.record(
            "embed",
            serde_json::json!({ "image": image }),
            serde_json::json!({ "embedding": out.embedding }),
        );
        Ok(out)
    }
}

/// Validate wire detections into domain detections, dropping invalid entries
/// with a count. Labels are trimmed and lowercased; boxes and confidences
/// must satisfy the detection invariants and clear the request threshold.
pub fn validate_detections(
    raw: &[crate::wire::WireDetection],
    box_threshold: f64,
) -> (Vec<(usize, Detection)>, usize) {
    let mut out = Vec::with_capacity(raw.len());
    let mut dropped = 0usize;
    for d in raw {
        let label = d.label.trim().to_lowercase();
        let bbox = match vigil_core::geometry::BBox::new(d.bbox[0], d.bbox[1], d.bbox[2], d.bbox[3])
        {
            Ok(b) => b,
            Err(_) => {
                dropped += 1;
                continue;
            }
        };
        if d.confidence < box_threshold {
            dropped += 1;
            continue;
        }
        match Detection::new(label, bbox, d.confidence) {
            Ok(det) => out.push((d.query_index, det)),
            Err(_) => dropped += 1,
        }
    }
    (out, dropped)
}
