//! Training-manifest assembly: stage-keyed sample lists with modality tags.
//!
//! Stage 1 lists video/label pairs, stage 2 enforces the 80/20
//! detection-to-CoT mixture by seeded sampling, stage 3 lists CoT items only.

use super::schema::{ManifestEntry, Modality};
use crate::scene_gate::{EventTag, SubclipRecord};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifests {
    pub stage1: Vec<ManifestEntry>,
    pub stage2: Vec<ManifestEntry>,
    pub stage3: Vec<ManifestEntry>,
}

/// Assemble the per-stage manifests.
///
/// `detection_ids` reference image-level detection samples (grounded sets),
/// `cot_ids` reference instruction items. Stage 2 samples a 4:1
/// detection-to-CoT mixture, seeded and deterministic; pools too small to
/// fill the exact ratio shrink it to the largest feasible 4:1 subset.
pub fn assemble(
    subclips: &[SubclipRecord],
    detection_ids: &[String],
    cot_ids: &[(String, EventTag)],
    seed: u64,
) -> Manifests {
    // Stage 1: one entry per video; a video with any abnormal subclip is
    // abnormal.
    let mut videos: BTreeMap<&str, bool> = BTreeMap::new();
    for s in subclips {
        *videos.entry(s.video_id.as_str()).or_insert(false) |= s.label.is_abnormal();
    }
    let stage1 = videos
        .into_iter()
        .map(|(video, abnormal)| ManifestEntry {
            id: video.to_string(),
            modality: Modality::VideoLabel,
            label: Some(if abnormal {
                EventTag::Abnormal
            } else {
                EventTag::Normal
            }),
        })
        .collect();

    // Stage 2: 80% detection + 20% CoT, seeded sampling without replacement.
    let n_cot = (detection_ids.len() / 4).min(cot_ids.len());
    let n_det = n_cot * 4;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut det_pool: Vec<&String> = detection_ids.iter().collect();
    det_pool.shuffle(&mut rng);
    let mut cot_pool: Vec<&(String, EventTag)> = cot_ids.iter().collect();
    cot_pool.shuffle(&mut rng);
    let mut stage2: Vec<ManifestEntry> = det_pool
        .into_iter()
        .take(n_det)
        .map(|id| ManifestEntry {
            id: id.clone(),
            modality: Modality::ImageDetection,
            label: None,
        })
        .collect();
    stage2.extend(
        cot_pool
            .into_iter()
            .take(n_cot)
            .map(|(id, label)| ManifestEntry {
                id: id.clone(),
                modality: Modality::Cot,
                label: Some(*label),
            }),
    );

    // Stage 3: every CoT item.
    let stage3 = cot_ids
        .iter()
        .map(|(id, label)| ManifestEntry {
            id: id.clone(),
            modality: Modality::Cot,
            label: Some(*label),
        })
        .collect();

    Manifests {
        stage1,
        stage2,
        stage3,
    }
}
