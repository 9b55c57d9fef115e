//! The mock teacher service: an axum router serving `/generate`, `/detect`,
//! and `/embed` backed by the deterministic mock suite. Lets the pipeline
//! run end-to-end across a real HTTP boundary without any model weights.

use crate::mock::MockSuite;
use crate::traits::{DetectorApi, EmbedderApi, VlmApi};
use crate::wire::{
    DetectRequest, DetectResponse, EmbedRequest, EmbedResponse, GenerateRequest, GenerateResponse,
    WireDetection,
};
use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;

#[derive(Clone)]
pub struct MockServerState {
    suite: Arc<MockSuite>,
    fail_first: Arc<AtomicU32>,
}

/// Build the mock service router. The first `fail_first` requests (across all
/// routes) answer 503, for exercising client retry paths over real HTTP.
pub fn mock_router(seed: u64, fail_first: u32) -> Router {
    let state = MockServerState {
        suite: Arc::new(MockSuite::new(seed)),
        fail_first: Arc::new(AtomicU32::new(fail_first)),
    };
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/generate", post(generate))
        .route("/detect", post(detect))
        .route("/embed", post(embed))
        .with_state(state)
}

fn should_fail(state: &MockServerState) -> bool {
    state
        .fail_first
        .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |v| v.checked_sub(1))
        .is_ok()
}

async fn generate(
    State(state): State<MockServerState>,
    Json(req): Json<GenerateRequest>,
) -> Result<Json<GenerateResponse>, StatusCode> {
    if should_fail(&state) {
        return Err(StatusCode::SERVICE_UNAVAILABLE);
    }
    let out = state
        .suite
        .vlm
        .generate(&req.media, &req.prompt, &req.params)
        .await
        .map_err(|_| StatusCode::INTERNAL_SERVER_ERROR)?;
    Ok(Json(GenerateResponse { text: out.text }))
}

async fn detect(
    State(state): State<MockServerState>,
    Json(req): Json<DetectRequest>,
) -> Result<Json<DetectResponse>, StatusCode> {
    if should_fail(&state) {
        return Err(StatusCode::SERVICE_UNAVAILABLE);
    }
    let out = state
        .suite
        .detector
        .detect(&req)
        .await
        .map_err(|_| StatusCode::INTERNAL_SERVER_ERROR)?;
    let detections = out
        .detections
        .into_iter()
        .map(|(query_index, d)| WireDetection {
            label: d.label,
            bbox: [d.bbox.x1, d.bbox.y1, d.bbox.x2, d.bbox.y2],
            confidence: d.confidence,
            query_index,
        })
        .collect();
    Ok(Json(DetectResponse { detections }))
}

async fn embed(
    State(state): State<MockServerState>,
    Json(req): Json<EmbedRequest>,
) -> Result<Json<EmbedResponse>, StatusCode> {
    if should_fail(&state) {
        return Err(StatusCode::SERVICE_UNAVAILABLE);
    }
    let out = state
        .suite
        .embedder
        .embed(&req.image)
        .await
        .map_err(|_| StatusCode::INTERNAL_SERVER_ERROR)?;
    Ok(Json(EmbedResponse {
        embedding: out.embedding,
    }))
}

/// Bind and serve the mock service, returning the bound address and the
/// server task handle. Use port 0 for an ephemeral port in tests.
pub async fn serve(
    addr: std::net::SocketAddr,
    seed: u64,
    fail_first: u32,
) -> std::io::Result<(std::net::SocketAddr, tokio::task::JoinHandle<()>)> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let router = mock_router(seed, fail_first);
    let handle = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, router).await {
            log::error!("mock service terminated: {e}");
        }
    });
    Ok((local, handle))
}
