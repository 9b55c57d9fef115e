//! Segmentation phase: embedding streams in, subclip records out.

use crate::EngineError;
use std::collections::BTreeMap;
use vigil_core::scene_gate::{self, GateConfig, SubclipRecord, SubsamplePolicy};
use vigil_core::store::{EmbeddingRecord, VideoMeta};

/// Segment every video's embedding stream, then optionally apply the
/// subsampling policy. Videos without any samples still produce their single
/// whole-video subclip.
pub fn run_segment(
    videos: &[VideoMeta],
    embeddings: &[EmbeddingRecord],
    cfg: &GateConfig,
    subsample: Option<(&SubsamplePolicy, u64)>,
) -> Result<Vec<SubclipRecord>, EngineError> {
    let mut streams: BTreeMap<&str, Vec<&EmbeddingRecord>> = BTreeMap::new();
    for r in embeddings {
        streams.entry(r.video_id.as_str()).or_default().push(r);
    }
    for stream in streams.values_mut() {
        stream.sort_by_key(|r| r.frame_index);
    }
    let known: std::collections::HashSet<&str> =
        videos.iter().map(|v| v.video_id.as_str()).collect();
    for video in streams.keys() {
        if !known.contains(video) {
            return Err(EngineError::Input(format!(
                "embeddings reference unknown video {video}"
            )));
        }
    }

    let mut subclips = Vec::new();
    for video in videos {
        let samples: Vec<vigil_core::scene_gate::EmbeddingSample> = streams
            .get(video.video_id.as_str())
            .map(|rs| rs.iter().map(|r| r.sample()).collect())
            .unwrap_or_default();
        let segs = scene_gate::segment(
            &video.video_id,
            &samples,
            video.total_frames,
            video.label,
            cfg,
        )?;
        subclips.extend(segs);
    }

    if let Some((policy, seed)) = subsample {
        subclips = scene_gate::subsample(&subclips, policy, seed);
    }
    Ok(subclips)
}
