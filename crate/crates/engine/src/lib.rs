//! Pipeline phase orchestration.
//!
//! Each phase is a function from in-memory inputs to in-memory outputs; the
//! CLI connects phases through files. Client-facing phases (narrate, ground,
//! synth) run their per-subclip work concurrently up to a configured bound
//! and emit results in (video_id, start_frame) order so outputs are
//! deterministic regardless of task interleaving.

mod ground;
mod narrate;
mod segment;
mod synth;

pub use ground::run_ground;
pub use narrate::{run_narrate, NarrateOutcome};
pub use segment::run_segment;
pub use synth::{run_synth, SynthOutcome};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Gate(#[from] vigil_core::scene_gate::GateError),
    #[error(transparent)]
    Client(#[from] vigil_clients::ClientError),
    #[error("{0}")]
    Input(String),
}

/// Annotation sentences attached to a frame range, joined into one prompt
/// slot. `min_overlap` of zero means any overlap qualifies.
pub fn annotations_text_for(
    sentences: &[vigil_core::store::AnnotationSentence],
    video_id: &str,
    start_frame: u64,
    end_frame: u64,
    min_overlap: f64,
) -> String {
    let mut parts: Vec<&str> = Vec::new();
    for s in sentences {
        if s.video_id != video_id {
            continue;
        }
        let frac = s.overlap_fraction(start_frame, end_frame);
        if frac > 0.0 && frac >= min_overlap {
            parts.push(&s.text);
        }
    }
    parts.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use vigil_core::store::AnnotationSentence;

    #[test]
    fn annotations_join_on_overlap() {
        let sentences = vec![
            AnnotationSentence {
                video_id: "v".into(),
                start_frame: 0,
                end_frame: 99,
                text: "first.".into(),
            },
            AnnotationSentence {
                video_id: "v".into(),
                start_frame: 100,
                end_frame: 199,
                text: "second.".into(),
            },
            AnnotationSentence {
                video_id: "w".into(),
                start_frame: 0,
                end_frame: 99,
                text: "other video.".into(),
            },
        ];
        assert_eq!(
            annotations_text_for(&sentences, "v", 0, 120, 0.0),
            "first. second."
        );
        assert_eq!(
            annotations_text_for(&sentences, "v", 150, 160, 0.0),
            "second."
        );
        // A stricter overlap requirement drops the barely touching sentence.
        assert_eq!(
            annotations_text_for(&sentences, "v", 99, 260, 0.5),
            "second."
        );
        assert_eq!(annotations_text_for(&sentences, "v", 500, 600, 0.0), "");
    }
}
