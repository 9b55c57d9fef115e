//! Deterministic in-process implementations of all three service clients.
//!
//! Every response is a pure function of (suite seed, request): the RNG for a
//! call is seeded from a hash of both, so responses are byte-identical across
//! runs and independent of call order or concurrency. Fault schedules and
//! latency injection are available for exercising the retry and bounding
//! machinery, and a synthetic-world generator produces embedding streams,
//! video manifests, and temporal annotations for offline pipeline runs.

use crate::endpoint::ClientError;
use crate::traits::{
    CallMeta, DetectOutcome, DetectorApi, EmbedOutcome, EmbedderApi, Generated, VlmApi,
};
use crate::wire::{DecodeParams, DetectRequest};
use async_trait::async_trait;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use std::sync::atomic::{AtomicU32, AtomicUsize, Ordering};
use std::sync::Arc;
use vigil_core::geometry::{BBox, Detection};
use vigil_core::narration::ObjectAnnotation;
use vigil_core::scene_gate::EventTag;
use vigil_core::store::{AnnotationSentence, EmbeddingRecord, VideoMeta};

/// Frame image reference convention used by the pipeline: `video@frame`.
pub fn frame_ref(video_id: &str, frame: u64) -> String {
    format!("{video_id}@{frame}")
}

fn parse_frame_ref(image: &str) -> Option<(&str, u64)> {
    let (video, frame) = image.rsplit_once('@')?;
    Some((video, frame.parse().ok()?))
}

/// Derive a per-request RNG from the suite seed and the request identity.
fn request_rng(seed: u64, parts: &[&str]) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    for p in parts {
        hasher.update((p.len() as u64).to_le_bytes());
        hasher.update(p.as_bytes());
    }
    let digest = hasher.finalize();
    let mut eight = [0u8; 8];
    eight.copy_from_slice(&digest[..8]);
    ChaCha8Rng::seed_from_u64(u64::from_le_bytes(eight))
}

/// Shared fault/latency/concurrency bookkeeping for one mock client.
#[derive(Debug, Default)]
pub struct MockState {
    calls: AtomicU32,
    fail_remaining: AtomicU32,
    latency_ms: AtomicU32,
    concurrent: AtomicUsize,
    max_concurrent: AtomicUsize,
}

impl MockState {
    /// Fail the next `n` calls with a retryable transport error.
    pub fn fail_next(&self, n: u32) {
        self.fail_remaining.store(n, Ordering::SeqCst);
    }

    pub fn set_latency_ms(&self, ms: u32) {
        self.latency_ms.store(ms, Ordering::SeqCst);
    }

    pub fn calls(&self) -> u32 {
        self.calls.load(Ordering::SeqCst)
    }

    /// Highest number of simultaneously in-flight calls observed.
    pub fn max_concurrent(&self) -> usize {
        self.max_concurrent.load(Ordering::SeqCst)
    }

    async fn enter(&self, service: &str) -> Result<MockGuard<'_>, ClientError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.concurrent.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_concurrent.fetch_max(now, Ordering::SeqCst);
        let guard = MockGuard { state: self };
        let latency = self.latency_ms.load(Ordering::SeqCst);
        if latency > 0 {
            tokio::time::sleep(std::time::Duration::from_millis(latency as u64)).await;
        }
        if self
            .fail_remaining
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |v| v.checked_sub(1))
            .is_ok()
        {
            return Err(ClientError::Transport {
                url: format!("mock://{service}"),
                attempts: 1,
                message: "injected failure".into(),
            });
        }
        Ok(guard)
    }
}

struct MockGuard<'a> {
    state: &'a MockState,
}

impl Drop for MockGuard<'_> {
    fn drop(&mut self) {
        self.state.concurrent.fetch_sub(1, Ordering::SeqCst);
    }
}

const NORMAL_REASONS: [&str; 6] = [
    "walking across the scene",
    "parked by the curb",
    "standing near the entrance",
    "leaning against the wall",
    "stationary in the background",
    "carrying groceries at a normal pace",
];

const ABNORMAL_REASONS: [&str; 6] = [
    "physically restraining another man",
    "kicking a vending machine",
    "running away with a stolen bag",
    "smashing a window",
    "lying motionless on the ground",
    "swinging an object at a person",
];

const OBJECT_LABELS: [&str; 10] = [
    "man",
    "person",
    "woman",
    "car",
    "motorcycle",
    "backpack",
    "ladder",
    "counter",
    "wall",
    "floor",
];

/// Deterministic narrator / CoT generator.
pub struct MockVlm {
    seed: u64,
    pub state: Arc<MockState>,
}

impl MockVlm {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            state: Arc::new(MockState::default()),
        }
    }

    fn narration_response(&self, media: &str, prompt: &str) -> String {
        let mut rng = request_rng(self.seed, &["narrate", media, prompt]);
        if rng.gen_bool(0.05) {
            return "[]".to_string();
        }
        let n = rng.gen_range(2..=6);
        let mut labels: Vec<&str> = Vec::new();
        let mut annotations = Vec::with_capacity(n);
        for _ in 0..n {
            let label = OBJECT_LABELS[rng.gen_range(0..OBJECT_LABELS.len())];
            labels.push(label);
            let abnormal = rng.gen_bool(0.35) && label != "wall" && label != "floor";
            let reason = if abnormal {
                ABNORMAL_REASONS[rng.gen_range(0..ABNORMAL_REASONS.len())]
            } else {
                NORMAL_REASONS[rng.gen_range(0..NORMAL_REASONS.len())]
            };
            annotations.push(ObjectAnnotation {
                event: if abnormal {
                    EventTag::Abnormal
                } else {
                    EventTag::Normal
                },
                reason: reason.to_string(),
                label: label.to_string(),
                confidence: (rng.gen_range(0.5..1.0f64) * 100.0).round() / 100.0,
            });
        }
        let mut body = serde_json::to_string(&annotations).expect("annotations serialize");
        if rng.gen_bool(0.10) {
            // A schema-violating trailing item; the parser must reject just it.
            body.truncate(body.len() - 1);
            body.push_str(
                r#",{"Event":"Normal","Reason":"ghost","label":"ghost","confidence":1.4}]"#,
            );
        }
        if rng.gen_bool(0.25) {
            return format!("```json\n{body}\n```");
        }
        body
    }

    fn cot_response(&self, media: &str, prompt: &str) -> String {
        let mut rng = request_rng(self.seed, &["cot", media, prompt]);
        let label = if prompt.contains("The video is labeled: Abnormal") {
            "Abnormal"
        } else {
            "Normal"
        };

        let bullet = regex::Regex::new(
            r#"- (?P<label>[^:\n]+?) at \[(?P<x1>\d+), (?P<y1>\d+), (?P<x2>\d+), (?P<y2>\d+)\]: "(?P<reason>[^"]*)" \((?P<event>Normal|Abnormal)\)"#,
        )
        .expect("bullet regex");
        let mut clauses: Vec<String> = Vec::new();
        for caps in bullet.captures_iter(prompt) {
            clauses.push(format!(
                "a {} at [{}, {}, {}, {}] {}",
                &caps["label"], &caps["x1"], &caps["y1"], &caps["x2"], &caps["y2"], &caps["reason"]
            ));
        }
        if rng.gen_bool(0.03) {
            // Occasionally forget the required terminal line; the synthesis
            // layer must reject these items.
            return format!("Observations: I observe {}.", clauses.join("; "));
        }
        let observations = if clauses.is_empty() {
            "In the video, I observe an unremarkable scene with no grounded objects.".to_string()
        } else {
            format!("In the video, I observe {}.", clauses.join("; "))
        };
        let analysis = match label {
            "Abnormal" => "The interactions above deviate from routine activity and indicate a dangerous event.",
            _ => "All observed behavior is routine and no object shows signs of dangerous activity.",
        };
        format!("Observations: {observations}\n\nAnalysis: {analysis}\n\nAnswer: {label}")
    }
}

#[async_trait]
impl VlmApi for MockVlm {
    async fn generate(
        &self,
        media: &str,
        prompt: &str,
        _params: &DecodeParams,
    ) -> Result<Generated, ClientError> {
        let _guard = self.state.enter("generate").await?;
        let text = if prompt.contains("Task 2: Object Detection") {
            self.narration_response(media, prompt)
        } else if prompt.contains("Write a chain-of-thought analysis") {
            self.cot_response(media, prompt)
        } else {
            format!("mock generation for {media}")
        };
        Ok(Generated {
            text,
            meta: CallMeta::default(),
        })
    }
}

/// Deterministic open-vocabulary detector.
pub struct MockDetector {
    seed: u64,
    pub state: Arc<MockState>,
}

impl MockDetector {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            state: Arc::new(MockState::default()),
        }
    }

    fn random_box(rng: &mut ChaCha8Rng, oversized: bool) -> BBox {
        let (w, h) = if oversized {
            (rng.gen_range(0.75..0.95), rng.gen_range(0.75..0.95))
        } else {
            (rng.gen_range(0.05..0.4), rng.gen_range(0.05..0.4))
        };
        let x1 = rng.gen_range(0.0..(1.0 - w));
        let y1 = rng.gen_range(0.0..(1.0 - h));
        // Detector coordinates sit on the 1/1000 grid, like pixel output
        // scaled to a fixed resolution; bin rendering is then lossless.
        let snap = |v: f64| (v * 1000.0).round() / 1000.0;
        BBox::new(snap(x1), snap(y1), snap(x1 + w), snap(y1 + h)).expect("generated box valid")
    }
}

#[async_trait]
impl DetectorApi for MockDetector {
    async fn detect(&self, request: &DetectRequest) -> Result<DetectOutcome, ClientError> {
        let _guard = self.state.enter("detect").await?;
        let query_key = request.queries.join("\u{1f}");
        let mut rng = request_rng(
            self.seed,
            &[
                "detect",
                &request.image,
                &query_key,
                &format!("{}", request.box_threshold),
            ],
        );

        let mut detections: Vec<(usize, Detection)> = Vec::new();
        for (qi, query) in request.queries.iter().enumerate() {
            let is_label_query = qi == 0;
            let count = if is_label_query {
                // 0 with p=0.15, 1 with p=0.55, else 2
                match rng.gen_range(0..100) {
                    0..=14 => 0,
                    15..=69 => 1,
                    _ => 2,
                }
            } else {
                usize::from(rng.gen_bool(0.4))
            };
            for _ in 0..count {
                // Scene-level queries mostly return frame-sized boxes, which
                // the area filter downstream is expected to remove.
                let scene_level = ["wall", "floor", "ground", "ceiling"]
                    .iter()
                    .any(|s| query.to_lowercase().contains(s));
                let oversized = rng.gen_bool(if scene_level && is_label_query {
                    0.7
                } else {
                    0.08
                });
                let bbox = Self::random_box(&mut rng, oversized);
                let label = if is_label_query {
                    let base = query.trim().to_lowercase();
                    if rng.gen_bool(0.25) {
                        format!("{base} in white shirt")
                    } else {
                        base
                    }
                } else {
                    // A reason-triggered hit: sometimes the described object,
                    // sometimes an unrelated word from the reason text.
                    let words: Vec<&str> = query.split_whitespace().collect();
                    let pick = if rng.gen_bool(0.5) {
                        words.last()
                    } else {
                        words.first()
                    };
                    pick.unwrap_or(&"object")
                        .trim_matches(|c: char| !c.is_alphanumeric())
                        .to_lowercase()
                };
                if label.is_empty() {
                    continue;
                }
                let confidence = rng.gen_range(request.box_threshold.max(0.05)..1.0);
                detections.push((
                    qi,
                    Detection::new(label, bbox, confidence).expect("mock detection valid"),
                ));
            }
        }
        Ok(DetectOutcome {
            detections,
            dropped: 0,
            meta: CallMeta::default(),
        })
    }
}

/// Deterministic image embedder with piecewise-constant scene structure.
pub struct MockEmbedder {
    seed: u64,
    dim: usize,
    pub state: Arc<MockState>,
}

impl MockEmbedder {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            dim: 32,
            state: Arc::new(MockState::default()),
        }
    }

    pub fn with_dim(seed: u64, dim: usize) -> Self {
        Self {
            seed,
            dim,
            state: Arc::new(MockState::default()),
        }
    }

    /// Scene boundaries of a video in frames (strictly increasing, each the
    /// first frame of a new scene).
    pub fn scene_starts(&self, video_id: &str, total_frames: u64) -> Vec<u64> {
        let mut rng = request_rng(self.seed, &["scenes", video_id]);
        let n_scenes = rng.gen_range(1..=4usize);
        let mut starts = vec![0u64];
        for _ in 1..n_scenes {
            let at = rng.gen_range(1..total_frames.max(2));
            starts.push(at);
        }
        starts.sort_unstable();
        starts.dedup();
        starts
    }

    fn scene_index(&self, video_id: &str, frame: u64, total_frames: u64) -> usize {
        let starts = self.scene_starts(video_id, total_frames);
        starts.iter().rposition(|s| *s <= frame).unwrap_or(0)
    }

    fn scene_vector(&self, video_id: &str, scene: usize) -> Vec<f64> {
        let mut rng = request_rng(self.seed, &["scene-vec", video_id, &scene.to_string()]);
        let mut v: Vec<f64> = (0..self.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut v {
            *x /= norm;
        }
        v
    }

    /// The embedding the mock serves for one frame. Total frames only shape
    /// the scene layout; pass the video's real frame count.
    pub fn embedding_for(&self, video_id: &str, frame: u64, total_frames: u64) -> Vec<f64> {
        let scene = self.scene_index(video_id, frame, total_frames);
        let base = self.scene_vector(video_id, scene);
        // Small in-scene jitter, renormalized: cosine to the scene base stays
        // well above any realistic gate threshold.
        let mut rng = request_rng(self.seed, &["jitter", video_id, &frame.to_string()]);
        let mut v: Vec<f64> = base
            .iter()
            .map(|x| x + rng.gen_range(-0.005..0.005))
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut v {
            *x /= norm;
        }
        v
    }
}

#[async_trait]
impl EmbedderApi for MockEmbedder {
    async fn embed(&self, image: &str) -> Result<EmbedOutcome, ClientError> {
        let _guard = self.state.enter("embed").await?;
        let embedding = match parse_frame_ref(image) {
            Some((video, frame)) => self.embedding_for(video, frame, frame.max(1) * 2),
            None => self.scene_vector(image, 0),
        };
        // Same client-side normalization as the HTTP path, so in-process and
        // over-the-wire runs are bit-identical.
        let embedding = crate::http::normalize_embedding(embedding, None, "mock://embed")?;
        Ok(EmbedOutcome {
            embedding,
            meta: CallMeta::default(),
        })
    }
}

/// All three mocks sharing one seed.
pub struct MockSuite {
    pub vlm: Arc<MockVlm>,
    pub detector: Arc<MockDetector>,
    pub embedder: Arc<MockEmbedder>,
}

impl MockSuite {
    pub fn new(seed: u64) -> Self {
        Self {
            vlm: Arc::new(MockVlm::new(seed)),
            detector: Arc::new(MockDetector::new(seed)),
            embedder: Arc::new(MockEmbedder::new(seed)),
        }
    }
}

/// Synthetic offline world: video manifests, stride-grid embedding streams,
/// and temporal annotation sentences, all deterministic in the seed.
pub fn synthetic_world(
    seed: u64,
    n_videos: usize,
    stride: u64,
) -> (
    Vec<VideoMeta>,
    Vec<EmbeddingRecord>,
    Vec<AnnotationSentence>,
) {
    let embedder = MockEmbedder::new(seed);
    let mut videos = Vec::with_capacity(n_videos);
    let mut embeddings = Vec::new();
    let mut annotations = Vec::new();
    for i in 0..n_videos {
        let video_id = format!("video_{i:03}");
        let mut rng = request_rng(seed, &["world", &video_id]);
        let total_frames: u64 = rng.gen_range(300..4000);
        let label = if i % 2 == 0 {
            EventTag::Normal
        } else {
            EventTag::Abnormal
        };
        videos.push(VideoMeta {
            video_id: video_id.clone(),
            total_frames,
            label,
        });

        let mut frame = 0;
        while frame < total_frames {
            embeddings.push(EmbeddingRecord {
                video_id: video_id.clone(),
                frame_index: frame,
                embedding: embedder.embedding_for(&video_id, frame, total_frames),
            });
            frame += stride;
        }

        let n_sentences = rng.gen_range(1..=4usize);
        let verbs = [
            "walks through the scene",
            "enters the store",
            "approaches the vehicle",
            "struggles with another person",
        ];
        for s in 0..n_sentences {
            let span = total_frames / n_sentences as u64;
            let start = s as u64 * span;
            annotations.push(AnnotationSentence {
                video_id: video_id.clone(),
                start_frame: start,
                end_frame: (start + span.max(1) - 1).min(total_frames - 1),
                text: format!("a person {}", verbs[rng.gen_range(0..verbs.len())]),
            });
        }
    }
    (videos, embeddings, annotations)
}
