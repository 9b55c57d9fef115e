//! Synthesis phase: grounded subclips become instruction items through the
//! CoT generation prompt, with a deterministic detection block prepended and
//! terminal-answer validation.

use crate::{annotations_text_for, EngineError};
use futures::stream::{self, StreamExt};
use vigil_clients::wire::DecodeParams;
use vigil_clients::VlmApi;
use vigil_core::cot::{build_cot_prompt, compose_item, format_object_context, InstructionItem};
use vigil_core::grounding::GroundedSetWire;
use vigil_core::scene_gate::parse_subclip_id;
use vigil_core::store::{AnnotationSentence, NarratedSubclip, RejectedSynthesis};

#[derive(Debug)]
pub struct SynthOutcome {
    pub items: Vec<InstructionItem>,
    pub rejected: Vec<RejectedSynthesis>,
}

/// Synthesize one instruction item per grounded subclip. Labels come from the
/// narrated records, joined on subclip_id; grounded subclips missing there
/// are input errors. Items whose CoT cannot be validated after the retry
/// budget are rejected with a reason, and the phase continues.
pub async fn run_synth(
    grounded: &[GroundedSetWire],
    narrated: &[NarratedSubclip],
    sentences: &[AnnotationSentence],
    vlm: &dyn VlmApi,
    max_parse_retries: u32,
    min_overlap: f64,
    bound: usize,
) -> Result<SynthOutcome, EngineError> {
    let by_id: std::collections::HashMap<&str, &NarratedSubclip> = narrated
        .iter()
        .map(|n| (n.subclip_id.as_str(), n))
        .collect();
    for set in grounded {
        if !by_id.contains_key(set.subclip_id.as_str()) {
            return Err(EngineError::Input(format!(
                "grounded subclip {} has no narrated record",
                set.subclip_id
            )));
        }
        if parse_subclip_id(&set.subclip_id).is_none() {
            return Err(EngineError::Input(format!(
                "malformed subclip id {}",
                set.subclip_id
            )));
        }
    }

    let params = DecodeParams::default();
    let results: Vec<(usize, Result<InstructionItem, RejectedSynthesis>)> =
        stream::iter(grounded.iter().enumerate())
            .map(|(index, wire)| {
                let params = params.clone();
                let meta = by_id[wire.subclip_id.as_str()];
                async move {
                    let set = match wire.clone().into_set() {
                        Ok(s) => s,
                        Err(e) => {
                            return (
                                index,
                                Err(RejectedSynthesis {
                                    subclip_id: wire.subclip_id.clone(),
                                    reason: format!("invalid grounded set: {e}"),
                                }),
                            )
                        }
                    };
                    let annotations_text = annotations_text_for(
                        sentences,
                        &meta.video_id,
                        meta.start_frame,
                        meta.end_frame,
                        min_overlap,
                    );
                    let context = format_object_context(&set);
                    let prompt = build_cot_prompt(&context, &annotations_text, meta.label);

                    let mut last_error = String::from("no attempt");
                    for _ in 0..=max_parse_retries {
                        match vlm.generate(&wire.subclip_id, &prompt, &params).await {
                            Ok(generated) => {
                                match compose_item(
                                    &wire.subclip_id,
                                    meta.label,
                                    &set,
                                    &generated.text,
                                ) {
                                    Ok(item) => return (index, Ok(item)),
                                    Err(e) => last_error = e.to_string(),
                                }
                            }
                            Err(e) => last_error = e.to_string(),
                        }
                    }
                    (
                        index,
                        Err(RejectedSynthesis {
                            subclip_id: wire.subclip_id.clone(),
                            reason: last_error,
                        }),
                    )
                }
            })
            .buffer_unordered(bound.max(1))
            .collect()
            .await;

    let mut results = results;
    results.sort_by_key(|(i, _)| *i);
    let mut items = Vec::new();
    let mut rejected = Vec::new();
    for (_, r) in results {
        match r {
            Ok(item) => items.push(item),
            Err(rej) => rejected.push(rej),
        }
    }
    Ok(SynthOutcome { items, rejected })
}
