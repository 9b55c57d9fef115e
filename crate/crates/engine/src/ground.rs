//! Grounding phase: dual-prompt detector queries over candidate anchor
//! frames, greedy assignment, and best-frame selection per subclip.

use crate::EngineError;
use futures::stream::{self, StreamExt};
use vigil_clients::mock::frame_ref;
use vigil_clients::wire::DetectRequest;
use vigil_clients::DetectorApi;
use vigil_core::grounding::{
    assign_frame, candidate_frames, select_best_frame, FrameGrounding, GroundedSetWire,
    GroundingConfig, PooledDetection, QueryKind,
};
use vigil_core::scene_gate::SubclipRecord;
use vigil_core::store::NarratedSubclip;

/// Ground one subclip: evaluate candidate frames latest-first, stop early
/// only when every object is grounded, and keep the frame that grounded the
/// most objects.
async fn ground_subclip(
    narrated: &NarratedSubclip,
    detector: &dyn DetectorApi,
    cfg: &GroundingConfig,
) -> GroundedSetWire {
    let record = SubclipRecord {
        video_id: narrated.video_id.clone(),
        start_frame: narrated.start_frame,
        end_frame: narrated.end_frame,
        label: narrated.label,
        boundary_similarity: None,
    };
    let frames = candidate_frames(&record, cfg);
    let mut outcomes: Vec<FrameGrounding> = Vec::new();

    if !narrated.objects.is_empty() {
        'frames: for &frame in &frames {
            let image = frame_ref(&narrated.video_id, frame);
            let mut pooled: Vec<PooledDetection> = Vec::new();
            // Per-frame detector calls stay sequential: the early exit below
            // depends on the outcome of the previous frame.
            for (object_index, object) in narrated.objects.iter().enumerate() {
                let request = DetectRequest {
                    image: image.clone(),
                    queries: vec![object.label.clone(), object.reason.clone()],
                    box_threshold: cfg.box_threshold,
                };
                match detector.detect(&request).await {
                    Ok(outcome) => {
                        for (query_index, detection) in outcome.detections {
                            let query = if query_index == 0 {
                                QueryKind::Label
                            } else {
                                QueryKind::Reason
                            };
                            pooled.push(PooledDetection {
                                object_index,
                                detection,
                                query,
                            });
                        }
                    }
                    Err(e) => {
                        log::warn!(
                            "{}: detector failed on frame {frame}: {e}",
                            narrated.subclip_id
                        );
                        continue 'frames;
                    }
                }
            }
            let grounding = assign_frame(frame, &narrated.objects, &pooled, cfg);
            let full = grounding.grounded_count() == narrated.objects.len();
            outcomes.push(grounding);
            if full {
                break;
            }
        }
    }

    let set = select_best_frame(
        &narrated.subclip_id,
        &narrated.objects,
        &outcomes,
        record.end_frame,
    );
    GroundedSetWire::from(&set)
}

/// Ground every narrated subclip with bounded concurrency; output in
/// (video_id, start_frame) order.
pub async fn run_ground(
    narrated: &[NarratedSubclip],
    detector: &dyn DetectorApi,
    cfg: &GroundingConfig,
    bound: usize,
) -> Result<Vec<GroundedSetWire>, EngineError> {
    let mut sets: Vec<(usize, GroundedSetWire)> = stream::iter(narrated.iter().enumerate())
        .map(|(i, n)| async move { (i, ground_subclip(n, detector, cfg).await) })
        .buffer_unordered(bound.max(1))
        .collect()
        .await;
    sets.sort_by_key(|(i, _)| *i);
    Ok(sets.into_iter().map(|(_, s)| s).collect())
}
