//! External-service clients for the vigil data engine.
//!
//! The pipeline talks to three teacher models over HTTP/JSON: a
//! vision-language narrator / CoT generator (`POST /generate`), an
//! open-vocabulary detector (`POST /detect`), and an image embedder
//! (`POST /embed`). This crate defines the wire schemas, the service traits
//! the engine consumes, reqwest-based clients with retry/backoff and an
//! in-flight bound, deterministic in-process mocks for offline runs, and an
//! axum router that serves the mocks as a real HTTP service.

pub mod archive;
pub mod endpoint;
pub mod http;
pub mod mock;
pub mod server;
pub mod traits;
pub mod wire;

pub use archive::ArchiveWriter;
pub use endpoint::{ClientError, ServiceEndpoint};
pub use traits::{
    CallMeta, Clients, DetectOutcome, DetectorApi, EmbedOutcome, EmbedderApi, Generated, VlmApi,
    WithArchive, WithRetry,
};
pub use wire::{
    DecodeParams, DetectRequest, DetectResponse, EmbedRequest, EmbedResponse, GenerateRequest,
    GenerateResponse, WireDetection,
};

use std::sync::Arc;

/// Wrap a client trio with the transcript archive when one is configured.
fn with_archive(clients: Clients, archive: Option<Arc<ArchiveWriter>>) -> Clients {
    match archive {
        Some(archive) => Clients {
            vlm: Arc::new(WithArchive::new(clients.vlm, archive.clone())),
            detector: Arc::new(WithArchive::new(clients.detector, archive.clone())),
            embedder: Arc::new(WithArchive::new(clients.embedder, archive)),
        },
        None => clients,
    }
}

/// HTTP clients for all three services, each wrapped with the endpoint's
/// retry policy and, when given, the transcript archive.
pub fn http_clients(
    cfg: &vigil_core::store::EndpointsConfig,
    archive: Option<Arc<ArchiveWriter>>,
) -> Result<Clients, ClientError> {
    let mk = |url: &str| -> Result<ServiceEndpoint, ClientError> {
        ServiceEndpoint::builder(url)?
            .timeout_secs(cfg.timeout_secs)
            .max_retries(cfg.max_retries)
            .max_in_flight(cfg.max_in_flight)
            .backoff_ms(cfg.backoff_ms)
            .auth_token(cfg.auth_token.clone())
            .build()
    };
    let vlm = http::HttpVlm::new(mk(&cfg.vlm_url)?)?;
    let detector = http::HttpDetector::new(mk(&cfg.detector_url)?)?;
    let embedder = http::HttpEmbedder::new(mk(&cfg.embedder_url)?, cfg.embed_dim)?;
    let retries = cfg.max_retries;
    let backoff = std::time::Duration::from_millis(cfg.backoff_ms);
    let clients = Clients {
        vlm: Arc::new(WithRetry::new(vlm, retries, backoff)),
        detector: Arc::new(WithRetry::new(detector, retries, backoff)),
        embedder: Arc::new(WithRetry::new(embedder, retries, backoff)),
    };
    Ok(with_archive(clients, archive))
}

/// Deterministic in-process clients, seeded and replayable; transcripts are
/// archived exactly as with the HTTP clients.
pub fn mock_clients(seed: u64, archive: Option<Arc<ArchiveWriter>>) -> Clients {
    let suite = mock::MockSuite::new(seed);
    let clients = Clients {
        vlm: Arc::new(suite.vlm),
        detector: Arc::new(suite.detector),
        embedder: Arc::new(suite.embedder),
    };
    with_archive(clients, archive)
}
