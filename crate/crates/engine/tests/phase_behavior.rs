//! Phase-contract tests with scripted stub clients: anchor-frame selection
//! semantics, early exit, and flagging behavior.

use async_trait::async_trait;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use vigil_clients::endpoint::ClientError;
use vigil_clients::traits::{CallMeta, DetectOutcome, DetectorApi, Generated, VlmApi};
use vigil_clients::wire::{DecodeParams, DetectRequest};
use vigil_core::geometry::{BBox, Detection};
use vigil_core::grounding::GroundingConfig;
use vigil_core::narration::ObjectAnnotation;
use vigil_core::scene_gate::{EventTag, SubclipRecord};
use vigil_core::store::{NarratedSubclip, NarrationConfig};

fn block_on<F: std::future::Future>(f: F) -> F::Output {
    tokio::runtime::Builder::new_current_thread()
        .enable_time()
        .build()
        .unwrap()
        .block_on(f)
}

/// Detector that answers from a per-frame script and counts calls.
struct ScriptedDetector {
    /// frame -> detections (label, box) returned for every query.
    script: Mutex<std::collections::HashMap<u64, Vec<(String, BBox)>>>,
    calls: AtomicUsize,
}

impl ScriptedDetector {
    fn new(script: Vec<(u64, Vec<(&str, BBox)>)>) -> Self {
        let map = script
            .into_iter()
            .map(|(f, v)| (f, v.into_iter().map(|(l, b)| (l.to_string(), b)).collect()))
            .collect();
        Self {
            script: Mutex::new(map),
            calls: AtomicUsize::new(0),
        }
    }
}

#[async_trait]
impl DetectorApi for ScriptedDetector {
    async fn detect(&self, request: &DetectRequest) -> Result<DetectOutcome, ClientError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let frame: u64 = request.image.rsplit_once('@').unwrap().1.parse().unwrap();
        let detections = self
            .script
            .lock()
            .unwrap()
            .get(&frame)
            .map(|v| {
                v.iter()
                    .map(|(label, bbox)| {
                        (0usize, Detection::new(label.clone(), *bbox, 0.9).unwrap())
                    })
                    .collect()
            })
            .unwrap_or_default();
        Ok(DetectOutcome {
            detections,
            dropped: 0,
            meta: CallMeta::default(),
        })
    }
}

fn bx(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
    BBox::new(x1, y1, x2, y2).unwrap()
}

fn subclip_with(labels: &[&str]) -> NarratedSubclip {
    NarratedSubclip {
        subclip_id: "v:0-600".into(),
        video_id: "v".into(),
        start_frame: 0,
        end_frame: 600,
        label: EventTag::Abnormal,
        objects: labels
            .iter()
            .map(|l| ObjectAnnotation {
                event: EventTag::Abnormal,
                reason: "doing something".into(),
                label: l.to_string(),
                confidence: 0.9,
            })
            .collect(),
        flagged: None,
        retries: 0,
    }
}

#[test]
fn early_exit_only_when_every_object_grounds() {
    block_on(async {
        // Last frame (600) grounds both objects: exactly one frame visited,
        // two detector calls (one per object).
        let detector = ScriptedDetector::new(vec![(
            600,
            vec![
                ("man", bx(0.1, 0.1, 0.3, 0.3)),
                ("car", bx(0.6, 0.6, 0.9, 0.9)),
            ],
        )]);
        let narrated = vec![subclip_with(&["man", "car"])];
        let sets = vigil_engine::run_ground(&narrated, &detector, &GroundingConfig::default(), 1)
            .await
            .unwrap();
        assert_eq!(
            detector.calls.load(Ordering::SeqCst),
            2,
            "early exit after the last frame"
        );
        assert_eq!(sets[0].anchor_frame, 600);
        assert_eq!(
            sets[0]
                .objects
                .iter()
                .filter(|o| o.bbox_2d.is_some())
                .count(),
            2
        );
    });
}

#[test]
fn partial_grounding_keeps_searching_and_prefers_the_best_frame() {
    block_on(async {
        // Frame 600 grounds only "man"; frame 300 grounds both. All six
        // candidate frames are visited (no early exit on partial results
        // until frame 300 completes the set), and 300 wins.
        let both = vec![
            ("man", bx(0.1, 0.1, 0.3, 0.3)),
            ("car", bx(0.6, 0.6, 0.9, 0.9)),
        ];
        let detector = ScriptedDetector::new(vec![
            (600, vec![("man", bx(0.1, 0.1, 0.3, 0.3))]),
            (500, vec![]),
            (400, vec![]),
            (300, both),
            (200, vec![]),
            (100, vec![]),
        ]);
        let narrated = vec![subclip_with(&["man", "car"])];
        let sets = vigil_engine::run_ground(&narrated, &detector, &GroundingConfig::default(), 1)
            .await
            .unwrap();
        assert_eq!(sets[0].anchor_frame, 300);
        // Frames 600..=300 visited with 2 calls each, then the exit fires.
        assert_eq!(detector.calls.load(Ordering::SeqCst), 8);
        assert_eq!(
            sets[0]
                .objects
                .iter()
                .filter(|o| o.bbox_2d.is_some())
                .count(),
            2
        );
    });
}

#[test]
fn tie_on_grounded_count_keeps_latest_frame() {
    block_on(async {
        let one = vec![("man", bx(0.1, 0.1, 0.3, 0.3))];
        let detector = ScriptedDetector::new(vec![
            (600, one.clone()),
            (500, one.clone()),
            (400, one.clone()),
            (300, one.clone()),
            (200, one.clone()),
            (100, one),
        ]);
        let narrated = vec![subclip_with(&["man", "car"])];
        let sets = vigil_engine::run_ground(&narrated, &detector, &GroundingConfig::default(), 1)
            .await
            .unwrap();
        assert_eq!(
            sets[0].anchor_frame, 600,
            "ties prefer the latest temporal frame"
        );
    });
}

/// VLM stub answering a fixed text.
struct FixedVlm {
    text: String,
}

#[async_trait]
impl VlmApi for FixedVlm {
    async fn generate(
        &self,
        _m: &str,
        _p: &str,
        _d: &DecodeParams,
    ) -> Result<Generated, ClientError> {
        Ok(Generated {
            text: self.text.clone(),
            meta: CallMeta::default(),
        })
    }
}

#[test]
fn empty_array_narration_flags_no_objects() {
    block_on(async {
        let vlm = FixedVlm { text: "[]".into() };
        let subclips = vec![SubclipRecord {
            video_id: "v".into(),
            start_frame: 0,
            end_frame: 100,
            label: EventTag::Normal,
            boundary_similarity: None,
        }];
        let out = vigil_engine::run_narrate(&subclips, &[], &vlm, &NarrationConfig::default(), 1)
            .await
            .unwrap();
        assert_eq!(out.narrated[0].flagged.as_deref(), Some("no objects"));
        assert!(out.narrated[0].objects.is_empty());
        assert_eq!(out.archive[0].accepted, 0);
    });
}

#[test]
fn unparseable_narration_flags_after_retry_budget() {
    block_on(async {
        let vlm = FixedVlm {
            text: "I refuse to answer in JSON.".into(),
        };
        let subclips = vec![SubclipRecord {
            video_id: "v".into(),
            start_frame: 0,
            end_frame: 100,
            label: EventTag::Normal,
            boundary_similarity: None,
        }];
        let out = vigil_engine::run_narrate(&subclips, &[], &vlm, &NarrationConfig::default(), 1)
            .await
            .unwrap();
        assert_eq!(
            out.narrated[0].flagged.as_deref(),
            Some("no usable narration")
        );
        assert_eq!(out.archive[0].response, "I refuse to answer in JSON.");
    });
}
