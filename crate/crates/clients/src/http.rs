//! reqwest-based clients for the three service endpoints.
//!
//! Each client performs a single attempt per call (retries are layered on by
//! [`crate::WithRetry`]), enforces the endpoint's in-flight bound with a
//! semaphore, and validates responses before handing them to the engine.

use crate::endpoint::{ClientError, ServiceEndpoint};
use crate::traits::{
    validate_detections, CallMeta, DetectOutcome, DetectorApi, EmbedOutcome, EmbedderApi,
    Generated, VlmApi,
};
use crate::wire::{
    DecodeParams, DetectRequest, DetectResponse, EmbedRequest, EmbedResponse, GenerateRequest,
    GenerateResponse,
};
use async_trait::async_trait;
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::sync::Arc;
use tokio::sync::Semaphore;

/// Shared POST-JSON machinery for one endpoint.
pub struct HttpService {
    endpoint: ServiceEndpoint,
    client: reqwest::Client,
    in_flight: Arc<Semaphore>,
}

impl HttpService {
    pub fn new(endpoint: ServiceEndpoint) -> Result<Self, ClientError> {
        let client = reqwest::Client::builder()
            .timeout(endpoint.timeout)
            .build()
            .map_err(|e| ClientError::InvalidEndpoint(e.to_string()))?;
        let in_flight = Arc::new(Semaphore::new(endpoint.max_in_flight));
        Ok(Self {
            endpoint,
            client,
            in_flight,
        })
    }

    async fn post_json<Req: Serialize, Resp: DeserializeOwned + Serialize>(
        &self,
        path: &str,
        request: &Req,
    ) -> Result<(Resp, CallMeta), ClientError> {
        let _permit = self
            .in_flight
            .acquire()
            .await
            .map_err(|_| ClientError::Transport {
                url: self.endpoint.url(path),
                attempts: 1,
                message: "client shut down".into(),
            })?;
        let url = self.endpoint.url(path);
        let started = std::time::Instant::now();
        let mut builder = self.client.post(&url).json(request);
        if let Some(token) = &self.endpoint.auth_token {
            builder = builder.bearer_auth(token);
        }
        let response = builder.send().await.map_err(|e| ClientError::Transport {
            url: url.clone(),
            attempts: 1,
            message: e.to_string(),
        })?;
        let status = response.status();
        if status.is_server_error() {
            // 5xx is transient by convention; surface it as retryable.
            return Err(ClientError::Transport {
                url,
                attempts: 1,
                message: format!("status {status}"),
            });
        }
        if !status.is_success() {
            let body = response.text().await.unwrap_or_default();
            let excerpt: String = body.chars().take(200).collect();
            return Err(ClientError::Protocol {
                url,
                status: Some(status.as_u16()),
                message: excerpt,
            });
        }
        let body: Resp = response.json().await.map_err(|e| ClientError::Protocol {
            url: url.clone(),
            status: Some(status.as_u16()),
            message: format!("bad response body: {e}"),
        })?;
        let meta = CallMeta {
            retries: 0,
            latency_ms: started.elapsed().as_millis() as u64,
        };
        Ok((body, meta))
    }
}

pub struct HttpVlm {
    service: HttpService,
}

impl HttpVlm {
    pub fn new(endpoint: ServiceEndpoint) -> Result<Self, ClientError> {
        Ok(Self {
            service: HttpService::new(endpoint)?,
        })
    }
}

#[async_trait]
impl VlmApi for HttpVlm {
    async fn generate(
        &self,
        media: &str,
        prompt: &str,
        params: &DecodeParams,
    ) -> Result<Generated, ClientError> {
        let request = GenerateRequest {
            media: media.to_string(),
            prompt: prompt.to_string(),
            params: params.clone(),
        };
        let (body, meta): (GenerateResponse, _) =
            self.service.post_json("/generate", &request).await?;
        Ok(Generated {
            text: body.text,
            meta,
        })
    }
}

pub struct HttpDetector {
    service: HttpService,
}

impl HttpDetector {
    pub fn new(endpoint: ServiceEndpoint) -> Result<Self, ClientError> {
        Ok(Self {
            service: HttpService::new(endpoint)?,
        })
    }
}

#[async_trait]
impl DetectorApi for HttpDetector {
    async fn detect(&self, request: &DetectRequest) -> Result<DetectOutcome, ClientError> {
        let (body, meta): (DetectResponse, _) = self.service.post_json("/detect", request).await?;
        let (detections, dropped) = validate_detections(&body.detections, request.box_threshold);
        if dropped > 0 {
            log::warn!("detector returned {dropped} invalid detection(s), dropped");
        }
        Ok(DetectOutcome {
            detections,
            dropped,
            meta,
        })
    }
}

pub struct HttpEmbedder {
    service: HttpService,
    expected_dim: Option<usize>,
}

impl HttpEmbedder {
    pub fn new(endpoint: ServiceEndpoint, expected_dim: Option<usize>) -> Result<Self, ClientError> {
        Ok(Self {
            service: HttpService::new(endpoint)?,
            expected_dim,
        })
    }
}

/// L2-normalize an embedding client-side; a zero vector is a domain error.
pub fn normalize_embedding(
    mut v: Vec<f64>,
    expected_dim: Option<usize>,
    url: &str,
) -> Result<Vec<f64>, ClientError> {
    if let Some(dim) = expected_dim {
        if v.len() != dim {
            return Err(ClientError::Protocol {
                url: url.to_string(),
                status: None,
                message: format!(
                    "embedding dimension {} does not match configured {dim}",
                    v.len()
                ),
            });
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(ClientError::Domain(
            "embedding has zero or non-finite norm".into(),
        ));
    }
    // Idempotent by construction: a vector that is already unit-norm up to
    // floating-point error passes through unchanged, so normalizing on both
    // sides of the wire stays bit-stable.
    if (norm - 1.0).abs() > 1e-12 {
        for x in &mut v {
            *x /= norm;
        }
    }
    Ok(v)
}

#[async_trait]
impl EmbedderApi for HttpEmbedder {
    async fn embed(&self, image: &str) -> Result<EmbedOutcome, ClientError> {
        let request = EmbedRequest {
            image: image.to_string(),
        };
        let (body, meta): (EmbedResponse, _) = self.service.post_json("/embed", &request).await?;
        let embedding = normalize_embedding(
            body.embedding,
            self.expected_dim,
            &self.service.endpoint.url("/embed"),
        )?;
        Ok(EmbedOutcome { embedding, meta })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_and_domain_errors() {
        let v = normalize_embedding(vec![3.0, 4.0], None, "u").unwrap();
        assert!((v[0] - 0.6).abs() < 1e-12 && (v[1] - 0.8).abs() < 1e-12);
        assert!(matches!(
            normalize_embedding(vec![0.0, 0.0], None, "u"),
            Err(ClientError::Domain(_))
        ));
        assert!(matches!(
            normalize_embedding(vec![1.0, 0.0], Some(512), "u"),
            Err(ClientError::Protocol { .. })
        ));
    }
}
