//! End-to-end tests of the HTTP clients against the axum mock service on an
//! ephemeral port: happy paths, retry-after-503, protocol errors, archive
//! capture, and parity with the in-process mocks.

use std::sync::Arc;
use vigil_clients::mock::{frame_ref, MockSuite};
use vigil_clients::server;
use vigil_clients::traits::{DetectorApi, EmbedderApi, VlmApi};
use vigil_clients::wire::{DecodeParams, DetectRequest};
use vigil_clients::{ArchiveWriter, ClientError};
use vigil_core::store::EndpointsConfig;

async fn start(seed: u64, fail_first: u32) -> std::net::SocketAddr {
    let (addr, _handle) = server::serve(([127, 0, 0, 1], 0).into(), seed, fail_first)
        .await
        .unwrap();
    addr
}

fn config_for(addr: std::net::SocketAddr) -> EndpointsConfig {
    let url = format!("http://{addr}");
    EndpointsConfig {
        vlm_url: url.clone(),
        detector_url: url.clone(),
        embedder_url: url,
        timeout_secs: 5.0,
        max_retries: 3,
        max_in_flight: 4,
        backoff_ms: 10,
        auth_token: None,
        embed_dim: Some(32),
    }
}

#[tokio::test]
async fn http_clients_match_in_process_mocks() {
    let seed = 77;
    let addr = start(seed, 0).await;
    let http = vigil_clients::http_clients(&config_for(addr), None).unwrap();
    let local = MockSuite::new(seed);

    let prompt = vigil_core::narration::build_narration_prompt("a man walks by.");
    let over_http = http
        .vlm
        .generate("video_000:0-300", &prompt, &DecodeParams::default())
        .await
        .unwrap();
    let in_process = local
        .vlm
        .generate("video_000:0-300", &prompt, &DecodeParams::default())
        .await
        .unwrap();
    assert_eq!(over_http.text, in_process.text);

    let request = DetectRequest {
        image: frame_ref("video_000", 299),
        queries: vec!["man".into(), "walking across the scene".into()],
        box_threshold: 0.25,
    };
    let over_http = http.detector.detect(&request).await.unwrap();
    let in_process = local.detector.detect(&request).await.unwrap();
    assert_eq!(over_http.detections, in_process.detections);

    let e_http = http
        .embedder
        .embed(&frame_ref("video_000", 299))
        .await
        .unwrap();
    let e_local = local
        .embedder
        .embed(&frame_ref("video_000", 299))
        .await
        .unwrap();
    assert_eq!(e_http.embedding, e_local.embedding);
    let norm: f64 = e_http.embedding.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!((norm - 1.0).abs() < 1e-9, "client-side normalization");
}

#[tokio::test]
async fn retries_recover_from_transient_503() {
    let addr = start(3, 2).await;
    let clients = vigil_clients::http_clients(&config_for(addr), None).unwrap();
    let out = clients
        .vlm
        .generate("m", "p", &DecodeParams::default())
        .await
        .unwrap();
    assert_eq!(out.meta.retries, 2);
}

#[tokio::test]
async fn permanent_outage_is_a_transport_error() {
    // Nothing listens on this port.
    let mut cfg = config_for("127.0.0.1:9".parse().unwrap());
    cfg.timeout_secs = 0.5;
    cfg.max_retries = 1;
    cfg.backoff_ms = 5;
    let clients = vigil_clients::http_clients(&cfg, None).unwrap();
    let err = clients
        .vlm
        .generate("m", "p", &DecodeParams::default())
        .await
        .unwrap_err();
    assert!(matches!(err, ClientError::Transport { .. }));
}

#[tokio::test]
async fn missing_route_is_a_protocol_error() {
    let addr = start(3, 0).await;
    let endpoint = vigil_clients::ServiceEndpoint::builder(&format!("http://{addr}/missing"))
        .unwrap()
        .timeout_secs(2.0)
        .build()
        .unwrap();
    let vlm = vigil_clients::http::HttpVlm::new(endpoint).unwrap();
    let err = vlm
        .generate("m", "p", &DecodeParams::default())
        .await
        .unwrap_err();
    match err {
        ClientError::Protocol { status, .. } => assert_eq!(status, Some(404)),
        other => panic!("expected protocol error, got {other}"),
    }
}

#[tokio::test]
async fn archive_captures_transcripts() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("transcripts.jsonl");
    let addr = start(3, 0).await;
    let archive = Arc::new(ArchiveWriter::new(&path));
    let clients = vigil_clients::http_clients(&config_for(addr), Some(archive.clone())).unwrap();
    clients
        .vlm
        .generate("m1", "p1", &DecodeParams::default())
        .await
        .unwrap();
    clients
        .embedder
        .embed(&frame_ref("video_000", 10))
        .await
        .unwrap();
    archive.finalize().unwrap();

    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    for line in lines {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["service"].is_string());
        assert!(v["request"].is_object());
        assert!(v["response"].is_object());
    }

    // The in-process mocks archive identically: same seed and calls produce
    // a byte-identical transcript.
    let mock_path = dir.path().join("mock_transcripts.jsonl");
    let mock_archive = Arc::new(ArchiveWriter::new(&mock_path));
    let mocked = vigil_clients::mock_clients(3, Some(mock_archive.clone()));
    mocked.vlm.generate("m1", "p1", &DecodeParams::default()).await.unwrap();
    mocked.embedder.embed(&frame_ref("video_000", 10)).await.unwrap();
    mock_archive.finalize().unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&mock_path).unwrap());
}
