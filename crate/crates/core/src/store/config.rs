//! Run configuration: one TOML document holding every knob of a pipeline run.

use crate::curriculum::StageConfig;
use crate::grounding::GroundingConfig;
use crate::scene_gate::{GateConfig, SubsamplePolicy};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// External model service endpoints and client behavior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointsConfig {
    pub vlm_url: String,
    pub detector_url: String,
    pub embedder_url: String,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub max_in_flight: usize,
    pub backoff_ms: u64,
    pub auth_token: Option<String>,
    /// Expected embedding dimension; mismatches are protocol errors.
    pub embed_dim: Option<usize>,
}

impl Default for EndpointsConfig {
    fn default() -> Self {
        Self {
            vlm_url: "http://127.0.0.1:8801".into(),
            detector_url: "http://127.0.0.1:8802".into(),
            embedder_url: "http://127.0.0.1:8803".into(),
            timeout_secs: 60.0,
            max_retries: 3,
            max_in_flight: 8,
            backoff_ms: 200,
            auth_token: None,
            embed_dim: Some(512),
        }
    }
}

impl EndpointsConfig {
    /// Environment overrides: VIGIL_VLM_URL, VIGIL_DETECTOR_URL,
    /// VIGIL_EMBEDDER_URL, VIGIL_AUTH_TOKEN.
    pub fn apply_env(&mut self) {
        if let Ok(v) = std::env::var("VIGIL_VLM_URL") {
            self.vlm_url = v;
        }
        if let Ok(v) = std::env::var("VIGIL_DETECTOR_URL") {
            self.detector_url = v;
        }
        if let Ok(v) = std::env::var("VIGIL_EMBEDDER_URL") {
            self.embedder_url = v;
        }
        if let Ok(v) = std::env::var("VIGIL_AUTH_TOKEN") {
            self.auth_token = Some(v);
        }
    }
}

/// Evaluation knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Pool unmatched ground-truth boxes as IoU 0 in mean IoU.
    pub penalize_unmatched: bool,
    pub recall_iou_threshold: f64,
    /// Gaussian smoothing sigma for interval-to-frame conversion, as a
    /// fraction of the video length.
    pub smoothing_sigma_frac: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            penalize_unmatched: true,
            recall_iou_threshold: 0.25,
            smoothing_sigma_frac: 0.02,
        }
    }
}

/// Narration-phase knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NarrationConfig {
    /// Extra generation attempts when a response fails to parse.
    pub max_parse_retries: u32,
    /// Minimum overlap fraction for a temporal annotation sentence to attach
    /// to a subclip. Zero means any overlap counts.
    pub min_overlap_fraction: f64,
}

impl Default for NarrationConfig {
    fn default() -> Self {
        Self {
            max_parse_retries: 1,
            min_overlap_fraction: 0.0,
        }
    }
}

/// Full run configuration. Every field has a default, so `{}` is a valid
/// config file; the defaults reproduce the reference pipeline settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub archive: bool,
    /// Frames per second used to convert frame counts to seconds in reports.
    pub fps: f64,
    /// Steps per epoch assumed by the schedule planner.
    pub steps_per_epoch: usize,
    pub gate: GateConfig,
    pub grounding: GroundingConfig,
    pub subsample: SubsamplePolicy,
    pub narration: NarrationConfig,
    pub stages: Vec<StageConfig>,
    pub endpoints: EndpointsConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            archive: false,
            fps: 30.0,
            steps_per_epoch: 100,
            gate: GateConfig::default(),
            grounding: GroundingConfig::default(),
            subsample: SubsamplePolicy::default(),
            narration: NarrationConfig::default(),
            stages: StageConfig::default_stages(),
            endpoints: EndpointsConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let cfg: RunConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| ConfigError::Invalid(format!("serialize: {e}")))?;
        std::fs::write(path, text).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.gate
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for s in &self.stages {
            s.validate()
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        if self.steps_per_epoch == 0 {
            return Err(ConfigError::Invalid("steps_per_epoch must be >= 1".into()));
        }
        if self.fps <= 0.0 {
            return Err(ConfigError::Invalid("fps must be > 0".into()));
        }
        let g = &self.grounding;
        if !(0.0..=1.0).contains(&g.box_threshold)
            || !(0.0..=1.0).contains(&g.dedup_iou)
            || !(0.0..=1.0).contains(&g.max_area_fraction)
        {
            return Err(ConfigError::Invalid(
                "grounding thresholds must lie in [0,1]".into(),
            ));
        }
        if self.endpoints.timeout_secs <= 0.0 || self.endpoints.max_in_flight == 0 {
            return Err(ConfigError::Invalid(
                "endpoint timeout and in-flight bound must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Steps per stage for the learning-rate schedule.
    pub fn steps_per_stage(&self) -> Vec<usize> {
        self.stages
            .iter()
            .map(|s| (s.epochs as usize * self.steps_per_epoch).max(1))
            .collect()
    }
}
