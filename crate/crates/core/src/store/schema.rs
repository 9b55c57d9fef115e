//! On-disk record schemas shared across pipeline phases, plus the `Validate`
//! implementations that make them safe to read back.

use super::jsonl::Validate;
use crate::cot::InstructionItem;
use crate::grounding::GroundedSetWire;
use crate::metrics::EvalRecord;
use crate::narration::{ObjectAnnotation, RejectedItem};
use crate::scene_gate::{EmbeddingSample, EventTag, SubclipRecord};
use serde::{Deserialize, Serialize};

/// One source video: frame count and weak label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub video_id: String,
    pub total_frames: u64,
    pub label: EventTag,
}

/// One embedding sample of one video's stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub video_id: String,
    pub frame_index: u64,
    pub embedding: Vec<f64>,
}

impl EmbeddingRecord {
    pub fn sample(&self) -> EmbeddingSample {
        EmbeddingSample {
            frame_index: self.frame_index,
            embedding: self.embedding.clone(),
        }
    }
}

/// A temporal annotation sentence from the external caption source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSentence {
    pub video_id: String,
    pub start_frame: u64,
    pub end_frame: u64,
    pub text: String,
}

impl AnnotationSentence {
    /// Overlap with a frame range as a fraction of the sentence span.
    pub fn overlap_fraction(&self, start: u64, end: u64) -> f64 {
        let lo = self.start_frame.max(start);
        let hi = self.end_frame.min(end);
        if hi < lo {
            return 0.0;
        }
        let span = (self.end_frame - self.start_frame + 1) as f64;
        (hi - lo + 1) as f64 / span
    }
}

/// Output of the narration phase for one subclip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarratedSubclip {
    pub subclip_id: String,
    pub video_id: String,
    pub start_frame: u64,
    pub end_frame: u64,
    pub label: EventTag,
    pub objects: Vec<ObjectAnnotation>,
    /// Why the subclip produced no usable narration, when it did not.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flagged: Option<String>,
    pub retries: u32,
}

/// Raw-response archive record for the narration phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarrationArchiveRecord {
    pub subclip_id: String,
    pub prompt_sha256: String,
    pub response: String,
    pub accepted: usize,
    pub rejected: Vec<RejectedItem>,
}

/// A synthesis rejection: the subclip and why its item was dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedSynthesis {
    pub subclip_id: String,
    pub reason: String,
}

/// Training-data modality of a manifest entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    VideoLabel,
    ImageDetection,
    Cot,
}

/// One sample reference in a stage manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub modality: Modality,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<EventTag>,
}

impl Validate for VideoMeta {
    fn validate(&self) -> Result<(), String> {
        if self.video_id.is_empty() {
            return Err("video_id is empty".into());
        }
        if self.total_frames == 0 {
            return Err("total_frames must be >= 1".into());
        }
        Ok(())
    }
}

impl Validate for EmbeddingRecord {
    fn validate(&self) -> Result<(), String> {
        if self.embedding.is_empty() {
            return Err("embedding is empty".into());
        }
        Ok(())
    }
}

impl Validate for AnnotationSentence {
    fn validate(&self) -> Result<(), String> {
        if self.end_frame < self.start_frame {
            return Err("end_frame precedes start_frame".into());
        }
        Ok(())
    }
}

impl Validate for SubclipRecord {
    fn validate(&self) -> Result<(), String> {
        if self.end_frame < self.start_frame {
            return Err(format!(
                "start_frame {} exceeds end_frame {}",
                self.start_frame, self.end_frame
            ));
        }
        Ok(())
    }
}

impl Validate for NarratedSubclip {
    fn validate(&self) -> Result<(), String> {
        for o in &self.objects {
            o.validate()?;
        }
        Ok(())
    }
}

impl Validate for GroundedSetWire {
    fn validate(&self) -> Result<(), String> {
        self.clone()
            .into_set()
            .map(|_| ())
            .map_err(|e| e.to_string())
    }
}

impl Validate for InstructionItem {
    fn validate(&self) -> Result<(), String> {
        let lower = self.assistant_response.to_lowercase();
        for header in ["observations:", "analysis:", "answer:"] {
            if !lower.contains(header) {
                return Err(format!("assistant response is missing the {header} header"));
            }
        }
        Ok(())
    }
}

impl Validate for EvalRecord {
    fn validate(&self) -> Result<(), String> {
        EvalRecord::validate(self).map_err(|e| e.to_string())
    }
}

impl Validate for NarrationArchiveRecord {
    fn validate(&self) -> Result<(), String> {
        Ok(())
    }
}

impl Validate for RejectedSynthesis {
    fn validate(&self) -> Result<(), String> {
        Ok(())
    }
}

impl Validate for ManifestEntry {
    fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("manifest id is empty".into());
        }
        Ok(())
    }
}
