//! Request/response schemas for the three service endpoints.
//!
//! `POST /generate` — `GenerateRequest` -> `GenerateResponse`
//! `POST /detect`   — `DetectRequest`   -> `DetectResponse`
//! `POST /embed`    — `EmbedRequest`    -> `EmbedResponse`
//!
//! Media is always passed by reference (a path, URL, or pipeline media id),
//! never inlined; box coordinates travel as normalized `[x1, y1, x2, y2]`.

use serde::{Deserialize, Serialize};

/// Decode parameters passed through to the generator opaquely. Defaults to
/// greedy decoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeParams {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_tokens: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub media: String,
    pub prompt: String,
    #[serde(default)]
    pub params: DecodeParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectRequest {
    pub image: String,
    pub queries: Vec<String>,
    pub box_threshold: f64,
}

/// One detection on the wire, with the index of the query that triggered it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireDetection {
    pub label: String,
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    pub confidence: f64,
    pub query_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectResponse {
    pub detections: Vec<WireDetection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub image: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub embedding: Vec<f64>,
}
