//! Narration phase: prompt the VLM per subclip and parse the structured
//! object annotations, with bounded concurrency and a raw-response archive.

use crate::{annotations_text_for, EngineError};
use futures::stream::{self, StreamExt};
use sha2::{Digest, Sha256};
use vigil_clients::wire::DecodeParams;
use vigil_clients::VlmApi;
use vigil_core::narration::{build_narration_prompt, parse_narration};
use vigil_core::scene_gate::SubclipRecord;
use vigil_core::store::{
    AnnotationSentence, NarratedSubclip, NarrationArchiveRecord, NarrationConfig,
};

#[derive(Debug)]
pub struct NarrateOutcome {
    pub narrated: Vec<NarratedSubclip>,
    pub archive: Vec<NarrationArchiveRecord>,
}

fn sha256_hex(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    format!("{:x}", hasher.finalize())
}

/// Narrate every subclip. Transport failures surviving the client's retry
/// budget and unparseable responses flag the subclip; the phase always
/// completes. Output order is (video_id, start_frame).
pub async fn run_narrate(
    subclips: &[SubclipRecord],
    sentences: &[AnnotationSentence],
    vlm: &dyn VlmApi,
    cfg: &NarrationConfig,
    bound: usize,
) -> Result<NarrateOutcome, EngineError> {
    let params = DecodeParams::default();
    let results: Vec<(NarratedSubclip, NarrationArchiveRecord)> = stream::iter(subclips)
        .map(|subclip| {
            let params = params.clone();
            async move {
                let annotations_text = annotations_text_for(
                    sentences,
                    &subclip.video_id,
                    subclip.start_frame,
                    subclip.end_frame,
                    cfg.min_overlap_fraction,
                );
                let prompt = build_narration_prompt(&annotations_text);
                let subclip_id = subclip.subclip_id();

                let mut retries = 0u32;
                let mut last_response = String::new();
                let mut outcome = None;
                for attempt in 0..=cfg.max_parse_retries {
                    match vlm.generate(&subclip_id, &prompt, &params).await {
                        Ok(generated) => {
                            retries += generated.meta.retries;
                            last_response = generated.text;
                            match parse_narration(&last_response) {
                                Ok(parsed) => {
                                    retries += attempt;
                                    outcome = Some(parsed);
                                    break;
                                }
                                Err(e) => {
                                    log::warn!("{subclip_id}: narration parse failed: {e}");
                                }
                            }
                        }
                        Err(e) => {
                            log::warn!("{subclip_id}: narration call failed: {e}");
                            last_response = format!("<error: {e}>");
                        }
                    }
                }

                let (objects, flagged, accepted, rejected) = match outcome {
                    Some(parsed) => {
                        let flagged = parsed.accepted.is_empty().then(|| "no objects".to_string());
                        let accepted = parsed.accepted.len();
                        (parsed.accepted, flagged, accepted, parsed.rejected)
                    }
                    None => (
                        Vec::new(),
                        Some("no usable narration".to_string()),
                        0,
                        Vec::new(),
                    ),
                };
                let narrated = NarratedSubclip {
                    subclip_id: subclip_id.clone(),
                    video_id: subclip.video_id.clone(),
                    start_frame: subclip.start_frame,
                    end_frame: subclip.end_frame,
                    label: subclip.label,
                    objects,
                    flagged,
                    retries,
                };
                let archive = NarrationArchiveRecord {
                    subclip_id,
                    prompt_sha256: sha256_hex(&prompt),
                    response: last_response,
                    accepted,
                    rejected,
                };
                (narrated, archive)
            }
        })
        .buffer_unordered(bound.max(1))
        .collect()
        .await;

    let mut results = results;
    results.sort_by(|a, b| {
        a.0.video_id
            .cmp(&b.0.video_id)
            .then(a.0.start_frame.cmp(&b.0.start_frame))
    });
    let (narrated, archive) = results.into_iter().unzip();
    Ok(NarrateOutcome { narrated, archive })
}
