//! Anchor-frame spatial localization.
//!
//! Each narrated object is queried against the detector with two prompts (its
//! label and its causal reason) on a sequence of candidate anchor frames,
//! starting from the subclip's last frame and falling back to earlier frames.
//! Detections that only match the reason are discarded, survivors go through
//! confidence-ordered greedy deduplication, oversized boxes are removed after
//! assignment, and the frame that grounds the most objects wins.
//!
//! The detector calls themselves live in the client/engine layers; this
//! module holds the pure frame-candidate and assignment logic.

use crate::geometry::{self, Assignment, BBox, Detection};
use crate::narration::ObjectAnnotation;
use crate::scene_gate::{EventTag, SubclipRecord};
use serde::{Deserialize, Serialize};

/// Grounding parameters: detector confidence floor 0.25, dedup IoU 0.5,
/// area cut at 50% of the frame, up to five fallback frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroundingConfig {
    pub box_threshold: f64,
    pub dedup_iou: f64,
    pub max_area_fraction: f64,
    pub fallback_frames: u32,
}

impl Default for GroundingConfig {
    fn default() -> Self {
        Self {
            box_threshold: 0.25,
            dedup_iou: 0.5,
            max_area_fraction: 0.5,
            fallback_frames: 5,
        }
    }
}

/// One narrated object with its (optional) anchored box. The three optional
/// fields are present together or absent together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundedObject {
    pub annotation: ObjectAnnotation,
    pub bbox: Option<BBox>,
    pub det_confidence: Option<f64>,
    pub anchor_frame: Option<u64>,
}

impl GroundedObject {
    pub fn ungrounded(annotation: ObjectAnnotation) -> Self {
        Self {
            annotation,
            bbox: None,
            det_confidence: None,
            anchor_frame: None,
        }
    }

    pub fn is_grounded(&self) -> bool {
        self.bbox.is_some()
    }

    pub fn validate(&self) -> Result<(), String> {
        let present = [
            self.bbox.is_some(),
            self.det_confidence.is_some(),
            self.anchor_frame.is_some(),
        ];
        if present.iter().any(|p| *p != present[0]) {
            return Err("box, det_confidence and anchor_frame must be present together".into());
        }
        Ok(())
    }
}

/// All objects of one subclip grounded on a single anchor frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundedSet {
    pub subclip_id: String,
    pub anchor_frame: u64,
    pub objects: Vec<GroundedObject>,
}

impl GroundedSet {
    pub fn grounded_count(&self) -> usize {
        self.objects.iter().filter(|o| o.is_grounded()).count()
    }
}

/// Which of the two prompts produced a pooled detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QueryKind {
    Label,
    Reason,
}

/// A detection pooled from the dual-prompt query for one object, with
/// provenance retained so reason-only hits can be filtered out.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledDetection {
    pub object_index: usize,
    pub detection: Detection,
    pub query: QueryKind,
}

/// Per-frame assignment outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameGrounding {
    pub frame: u64,
    /// `(object index, detection, confidence)` for each grounded object.
    pub boxed: Vec<(usize, Detection)>,
    /// Detections discarded because their label did not match the object
    /// label (typically reason-triggered hits).
    pub discarded_by_label: usize,
    /// Assigned boxes removed afterwards for covering too much of the frame.
    pub removed_by_area: usize,
}

impl FrameGrounding {
    pub fn grounded_count(&self) -> usize {
        self.boxed.len()
    }
}

/// Candidate anchor frames for a subclip: the last frame first, then up to
/// `fallback_frames` frames uniformly spaced inside the subclip, in reverse
/// temporal order, deduplicated.
pub fn candidate_frames(subclip: &SubclipRecord, cfg: &GroundingConfig) -> Vec<u64> {
    let start = subclip.start_frame;
    let end = subclip.end_frame;
    let mut frames = vec![end];
    if end > start {
        let span = (end - start) as f64;
        let step = span / (cfg.fallback_frames as f64 + 1.0);
        for k in 1..=cfg.fallback_frames as u64 {
            let raw = end as f64 - k as f64 * step;
            let f = raw.round() as u64;
            if f > start && f < end && !frames.contains(&f) {
                frames.push(f);
            }
        }
    }
    frames
}

/// Assign boxes for one candidate frame from the pooled dual-prompt
/// detections of all objects.
///
/// Steps, in order: drop detections whose label fails the bidirectional
/// substring match against the object label; greedy-dedup the survivors at
/// `cfg.dedup_iou`; drop assigned boxes larger than `cfg.max_area_fraction`
/// (an oversized box still consumes its assignment slot).
pub fn assign_frame(
    frame: u64,
    annotations: &[ObjectAnnotation],
    pooled: &[PooledDetection],
    cfg: &GroundingConfig,
) -> FrameGrounding {
    let mut candidates: Vec<(usize, Detection)> = Vec::new();
    let mut discarded_by_label = 0usize;
    for p in pooled {
        let object_label = &annotations[p.object_index].label;
        if geometry::label_match(&p.detection.label, object_label) {
            candidates.push((p.object_index, p.detection.clone()));
        } else {
            discarded_by_label += 1;
        }
    }

    let assignment: Assignment = geometry::greedy_dedup(&candidates, cfg.dedup_iou);

    let mut boxed = Vec::new();
    let mut removed_by_area = 0usize;
    for (object_index, det_index) in assignment.pairs {
        let det = candidates[det_index].1.clone();
        if geometry::area_fraction(&det.bbox) > cfg.max_area_fraction {
            removed_by_area += 1;
            continue;
        }
        boxed.push((object_index, det));
    }
    boxed.sort_by_key(|(i, _)| *i);
    FrameGrounding {
        frame,
        boxed,
        discarded_by_label,
        removed_by_area,
    }
}

/// Fold per-frame outcomes into a [`GroundedSet`], selecting the frame that
/// grounded the most objects. `outcomes` must be in candidate order (latest
/// temporal frame first); ties keep the earliest-evaluated frame. An empty
/// outcome list anchors on `default_frame` with nothing grounded.
pub fn select_best_frame(
    subclip_id: &str,
    annotations: &[ObjectAnnotation],
    outcomes: &[FrameGrounding],
    default_frame: u64,
) -> GroundedSet {
    // Strict comparison keeps the first (latest temporal) frame on ties.
    let mut best: Option<&FrameGrounding> = None;
    for o in outcomes {
        if best.is_none_or(|b| o.grounded_count() > b.grounded_count()) {
            best = Some(o);
        }
    }
    let (anchor, boxed): (u64, &[(usize, Detection)]) = match best {
        Some(o) => (o.frame, &o.boxed),
        None => (default_frame, &[]),
    };

    let mut objects: Vec<GroundedObject> = annotations
        .iter()
        .cloned()
        .map(GroundedObject::ungrounded)
        .collect();
    for (idx, det) in boxed {
        objects[*idx] = GroundedObject {
            annotation: annotations[*idx].clone(),
            bbox: Some(det.bbox),
            det_confidence: Some(det.confidence),
            anchor_frame: Some(anchor),
        };
    }
    GroundedSet {
        subclip_id: subclip_id.to_string(),
        anchor_frame: anchor,
        objects,
    }
}

/// Fraction of objects that received a box, over a whole dataset.
pub fn grounding_rate(sets: &[GroundedSet]) -> f64 {
    let total: usize = sets.iter().map(|s| s.objects.len()).sum();
    if total == 0 {
        return 0.0;
    }
    let grounded: usize = sets.iter().map(|s| s.grounded_count()).sum();
    grounded as f64 / total as f64
}

/// Wire form of one grounded object: bins for the box, nulls when ungrounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundedObjectWire {
    pub label: String,
    pub event: EventTag,
    pub reason: String,
    pub confidence: f64,
    pub bbox_2d: Option<[u32; 4]>,
    pub det_confidence: Option<f64>,
}

/// Wire form of a grounded set, the JSONL record emitted by the grounding
/// phase: `{subclip_id, anchor_frame, objects: [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundedSetWire {
    pub subclip_id: String,
    pub anchor_frame: u64,
    pub objects: Vec<GroundedObjectWire>,
}

impl From<&GroundedSet> for GroundedSetWire {
    fn from(set: &GroundedSet) -> Self {
        let objects = set
            .objects
            .iter()
            .map(|o| GroundedObjectWire {
                label: o.annotation.label.clone(),
                event: o.annotation.event,
                reason: o.annotation.reason.clone(),
                confidence: o.annotation.confidence,
                bbox_2d: o.bbox.as_ref().map(|b| geometry::to_bins(b).as_array()),
                det_confidence: o.det_confidence,
            })
            .collect();
        Self {
            subclip_id: set.subclip_id.clone(),
            anchor_frame: set.anchor_frame,
            objects,
        }
    }
}

impl GroundedSetWire {
    /// Rehydrate the in-memory form; box bins become normalized coordinates.
    pub fn into_set(self) -> Result<GroundedSet, geometry::GeometryError> {
        let anchor = self.anchor_frame;
        let mut objects = Vec::with_capacity(self.objects.len());
        for o in self.objects {
            let bbox = match o.bbox_2d {
                Some([x1, y1, x2, y2]) => Some(geometry::from_bins(&geometry::BinBox::new(
                    x1, y1, x2, y2,
                )?)?),
                None => None,
            };
            let grounded = bbox.is_some();
            objects.push(GroundedObject {
                annotation: ObjectAnnotation {
                    event: o.event,
                    reason: o.reason,
                    label: o.label,
                    confidence: o.confidence,
                },
                bbox,
                det_confidence: o.det_confidence,
                anchor_frame: grounded.then_some(anchor),
            });
        }
        Ok(GroundedSet {
            subclip_id: self.subclip_id,
            anchor_frame: anchor,
            objects,
        })
    }
}
