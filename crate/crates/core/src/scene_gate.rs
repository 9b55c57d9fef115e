//! Scene-aware temporal decomposition driven by an image-embedding stream.
//!
//! Videos are sampled every `stride` frames; a subclip boundary is declared
//! whenever the cosine similarity between the current sample and the previous
//! boundary frame drops below `tau`, at which point the boundary reference
//! moves to the current sample. Frame 0 is always the first reference.
//!
//! The streaming form ([`GateState`]) produces exactly the same boundaries as
//! the batch form ([`segment`]) for any stream.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GateError {
    #[error("zero-norm vector in cosine similarity")]
    ZeroVector,
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("embedding at frame {0} is not unit-norm (|v| = {1})")]
    NotUnitNorm(u64, f64),
    #[error("sample frame {0} is not on the stride grid (stride {1})")]
    OffGrid(u64, u64),
    #[error("non-monotone frame index {0} after {1}")]
    NonMonotone(u64, u64),
    #[error("total_frames {0} does not cover the last sample frame {1}")]
    ShortStream(u64, u64),
    #[error("invalid gate config: {0}")]
    InvalidConfig(String),
}

/// Binary weak label carried by every subclip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventTag {
    Normal,
    Abnormal,
}

impl EventTag {
    pub fn is_abnormal(&self) -> bool {
        matches!(self, EventTag::Abnormal)
    }
}

impl std::fmt::Display for EventTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EventTag::Normal => write!(f, "Normal"),
            EventTag::Abnormal => write!(f, "Abnormal"),
        }
    }
}

/// One embedding sample on the stride grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSample {
    pub frame_index: u64,
    pub embedding: Vec<f64>,
}

impl EmbeddingSample {
    pub fn check_unit_norm(&self) -> Result<(), GateError> {
        let norm = self.embedding.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(GateError::NotUnitNorm(self.frame_index, norm));
        }
        Ok(())
    }
}

/// Gate parameters. Defaults: sample every 15th frame, boundary when the
/// cosine to the reference drops below 0.92.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GateConfig {
    pub stride: u64,
    pub tau: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            stride: 15,
            tau: 0.92,
        }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<(), GateError> {
        if self.stride < 1 {
            return Err(GateError::InvalidConfig("stride must be >= 1".into()));
        }
        if !(-1.0 < self.tau && self.tau < 1.0) {
            return Err(GateError::InvalidConfig(format!(
                "tau {} outside (-1, 1)",
                self.tau
            )));
        }
        Ok(())
    }
}

/// A temporally coherent segment of one video. Subclips of a video are
/// disjoint, ordered, and together cover `[0, last_frame]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubclipRecord {
    pub video_id: String,
    pub start_frame: u64,
    pub end_frame: u64,
    pub label: EventTag,
    /// Cosine similarity that triggered this subclip's opening boundary;
    /// absent for the first subclip of a video.
    pub boundary_similarity: Option<f64>,
}

impl SubclipRecord {
    /// Content-stable identifier: `video_id:start-end`.
    pub fn subclip_id(&self) -> String {
        format!("{}:{}-{}", self.video_id, self.start_frame, self.end_frame)
    }

    pub fn len_frames(&self) -> u64 {
        self.end_frame - self.start_frame + 1
    }
}

/// Parse a `video_id:start-end` identifier back into its parts.
pub fn parse_subclip_id(id: &str) -> Option<(String, u64, u64)> {
    let (video, frames) = id.rsplit_once(':')?;
    let (start, end) = frames.split_once('-')?;
    Some((video.to_string(), start.parse().ok()?, end.parse().ok()?))
}

/// Cosine similarity between two vectors.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, GateError> {
    if a.len() != b.len() {
        return Err(GateError::DimensionMismatch(a.len(), b.len()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(GateError::ZeroVector);
    }
    Ok(dot / (na * nb))
}

/// Batch segmentation of a full embedding stream.
///
/// `samples` must sit exactly on the stride grid `{0, stride, 2*stride, ...}`.
/// An empty stream yields a single subclip covering the whole video.
pub fn segment(
    video_id: &str,
    samples: &[EmbeddingSample],
    total_frames: u64,
    label: EventTag,
    cfg: &GateConfig,
) -> Result<Vec<SubclipRecord>, GateError> {
    cfg.validate()?;
    let mut state = GateState::new(video_id, label, *cfg)?;
    let mut out = Vec::new();
    for s in samples {
        if let Some(done) = state.push(s)? {
            out.push(done);
        }
    }
    out.extend(state.finish(total_frames)?);
    Ok(out)
}

/// Streaming segmentation state for a single video. Single-writer; distinct
/// streams may run on distinct threads.
#[derive(Debug, Clone)]
pub struct GateState {
    video_id: String,
    label: EventTag,
    cfg: GateConfig,
    reference: Option<Vec<f64>>,
    current_start: u64,
    current_similarity: Option<f64>,
    last_frame: Option<u64>,
}

impl GateState {
    pub fn new(video_id: &str, label: EventTag, cfg: GateConfig) -> Result<Self, GateError> {
        cfg.validate()?;
        Ok(Self {
            video_id: video_id.to_string(),
            label,
            cfg,
            reference: None,
            current_start: 0,
            current_similarity: None,
            last_frame: None,
        })
    }

    fn record(&self, start: u64, end: u64, similarity: Option<f64>) -> SubclipRecord {
        SubclipRecord {
            video_id: self.video_id.clone(),
            start_frame: start,
            end_frame: end,
            label: self.label,
            boundary_similarity: similarity,
        }
    }

    /// Feed one sample; returns the completed subclip when this sample opens
    /// a new boundary.
    pub fn push(&mut self, sample: &EmbeddingSample) -> Result<Option<SubclipRecord>, GateError> {
        if let Some(last) = self.last_frame {
            if sample.frame_index <= last {
                return Err(GateError::NonMonotone(sample.frame_index, last));
            }
        }
        if !sample.frame_index.is_multiple_of(self.cfg.stride) {
            return Err(GateError::OffGrid(sample.frame_index, self.cfg.stride));
        }
        sample.check_unit_norm()?;
        self.last_frame = Some(sample.frame_index);

        let Some(reference) = &self.reference else {
            if sample.frame_index != 0 {
                return Err(GateError::OffGrid(sample.frame_index, self.cfg.stride));
            }
            self.reference = Some(sample.embedding.clone());
            return Ok(None);
        };

        let sim = cosine(&sample.embedding, reference)?;
        if sim < self.cfg.tau {
            let done = self.record(
                self.current_start,
                sample.frame_index - 1,
                self.current_similarity,
            );
            self.current_start = sample.frame_index;
            self.current_similarity = Some(sim);
            self.reference = Some(sample.embedding.clone());
            return Ok(Some(done));
        }
        Ok(None)
    }

    /// Flush the final subclip. `total_frames` must cover every pushed sample.
    pub fn finish(self, total_frames: u64) -> Result<Vec<SubclipRecord>, GateError> {
        if total_frames == 0 {
            return Err(GateError::InvalidConfig("total_frames must be >= 1".into()));
        }
        if let Some(last) = self.last_frame {
            if total_frames <= last {
                return Err(GateError::ShortStream(total_frames, last));
            }
        }
        Ok(vec![self.record(
            self.current_start,
            total_frames - 1,
            self.current_similarity,
        )])
    }
}

/// Subsampling policy: keep at most `per_video` subclips per video, preferring
/// one from each class when both exist, then backfill the global shortfall
/// with uniformly sampled leftover normal subclips.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubsamplePolicy {
    pub per_video: usize,
}

impl Default for SubsamplePolicy {
    fn default() -> Self {
        Self { per_video: 2 }
    }
}

/// Apply the subsampling policy. `subclips` may span many videos; the result
/// preserves (video_id, start_frame) order and is deterministic given `seed`.
///
/// Within a class the longest subclip wins; the per-video quota is filled
/// class-alternating (abnormal first), then by length.
pub fn subsample(
    subclips: &[SubclipRecord],
    policy: &SubsamplePolicy,
    seed: u64,
) -> Vec<SubclipRecord> {
    use std::collections::BTreeMap;

    let mut by_video: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in subclips.iter().enumerate() {
        by_video.entry(s.video_id.as_str()).or_default().push(i);
    }

    let longest_first = |a: &usize, b: &usize| {
        subclips[*b]
            .len_frames()
            .cmp(&subclips[*a].len_frames())
            .then(subclips[*a].start_frame.cmp(&subclips[*b].start_frame))
    };

    // Class-preferred slots: at most one abnormal and one normal per video
    // (the longest of each); everything beyond that is backfill territory.
    let mut selected: Vec<usize> = Vec::new();
    for indices in by_video.values() {
        let mut abnormal: Vec<usize> = indices
            .iter()
            .copied()
            .filter(|&i| subclips[i].label.is_abnormal())
            .collect();
        let mut normal: Vec<usize> = indices
            .iter()
            .copied()
            .filter(|&i| !subclips[i].label.is_abnormal())
            .collect();
        abnormal.sort_by(longest_first);
        normal.sort_by(longest_first);

        let mut picked: Vec<usize> = Vec::new();
        if let Some(&a) = abnormal.first() {
            if picked.len() < policy.per_video {
                picked.push(a);
            }
        }
        if let Some(&n) = normal.first() {
            if picked.len() < policy.per_video {
                picked.push(n);
            }
        }
        selected.extend(picked);
    }

    // Backfill toward per_video * n_videos with leftover normal subclips,
    // never pushing any video past the per-video cap.
    let target = policy.per_video * by_video.len();
    if selected.len() < target {
        let chosen: std::collections::HashSet<usize> = selected.iter().copied().collect();
        let mut per_video_count: BTreeMap<&str, usize> = BTreeMap::new();
        for &i in &selected {
            *per_video_count
                .entry(subclips[i].video_id.as_str())
                .or_default() += 1;
        }
        let mut pool: Vec<usize> = (0..subclips.len())
            .filter(|i| !chosen.contains(i) && !subclips[*i].label.is_abnormal())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        pool.shuffle(&mut rng);
        let mut need = target - selected.len();
        for i in pool {
            if need == 0 {
                break;
            }
            let count = per_video_count
                .entry(subclips[i].video_id.as_str())
                .or_default();
            if *count >= policy.per_video {
                continue;
            }
            *count += 1;
            selected.push(i);
            need -= 1;
        }
    }

    selected.sort_by(|&a, &b| {
        subclips[a]
            .video_id
            .cmp(&subclips[b].video_id)
            .then(subclips[a].start_frame.cmp(&subclips[b].start_frame))
    });
    selected.into_iter().map(|i| subclips[i].clone()).collect()
}
