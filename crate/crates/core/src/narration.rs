//! Object-centric event narration: the prompt sent to the narrator VLM and
//! the parser for its structured JSON response.
//!
//! The narrator is asked to enumerate every salient object in a subclip and
//! tag each with an event, a causal reason, a lowercase label, and a
//! confidence. The response contract is a bare JSON array, but real model
//! output frequently arrives wrapped in code fences or prose, so the parser
//! strips those before parsing and collects per-item schema violations
//! instead of failing wholesale.

use crate::scene_gate::EventTag;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NarrationError {
    #[error("no parseable JSON array in response (searched from byte offset {0})")]
    NoArray(usize),
    #[error("JSON array at byte offset {offset} failed to parse: {message}")]
    BadArray { offset: usize, message: String },
}

/// One narrated object: event tag, causal reason, lowercase label, confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectAnnotation {
    #[serde(rename = "Event")]
    pub event: EventTag,
    #[serde(rename = "Reason")]
    pub reason: String,
    pub label: String,
    pub confidence: f64,
}

impl ObjectAnnotation {
    pub fn validate(&self) -> Result<(), String> {
        if self.label.is_empty() {
            return Err("label is empty".into());
        }
        if self.label != self.label.to_lowercase() {
            return Err(format!("label {:?} is not lowercase", self.label));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(format!("confidence {} outside [0,1]", self.confidence));
        }
        Ok(())
    }
}

/// An array item the parser refused, with the schema violation that caused it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedItem {
    pub index: usize,
    pub reason: String,
}

/// Parse result: accepted annotations plus a rejection report.
/// `accepted.len() + rejected.len()` equals the JSON array length.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NarrationParse {
    pub accepted: Vec<ObjectAnnotation>,
    pub rejected: Vec<RejectedItem>,
}

/// Event narration prompt template; `{annotations_text}` is the only slot.
pub const NARRATION_TEMPLATE: &str = r#"You are analyzing a surveillance video with temporal annotations. Ignore any biases emerging from text on the video.

Temporal Annotations: {annotations_text}

Task 1: Binary Classification — Classify this video as Normal or Abnormal using the following questions:
1. Are there any people not in their typical positions or engaging in activities inconsistent with usual behavior?
2. Are there any collisions between people, vehicles, or objects that indicate abnormal or unsafe behavior?
3. Are there any injuries visible (e.g., person lying on the ground, limping, requiring assistance)?
4. Is there any abuse or aggressive behavior (e.g., pushing, hitting, kicking)?
5. Are there any objects or equipment being used in an unsafe or unusual way?
6. Is there any visible damage or unusual movement that indicates an anomaly?
7. Are there any signs of physical aggression, fighting, or violent behavior between people?

Task 2: Object Detection — List ALL detected objects in the video. For each object return:
- The object name (in lowercase)
- A confidence score between 0 and 1
- Event: "Normal" if the object is behaving normally, "Abnormal" ONLY if the object is DIRECTLY involved in abnormal/dangerous activity
- Reason: a short factual description of what the object is doing. The Reason MUST be consistent with the Event — if the Reason describes normal/routine behavior, the Event MUST be "Normal". Only set Event to "Abnormal" when the Reason clearly describes harmful, violent, or dangerous behavior.

CRITICAL: You MUST respond ONLY with a valid JSON array. Do not include any text before or after the JSON.

Output the results as a JSON array, where each element is:
{"Event": "Normal" or "Abnormal",
 "Reason": "short factual description",
 "label": "detected object in lowercase",
 "confidence": float}"#;

/// Instantiate the narration prompt for one subclip.
pub fn build_narration_prompt(annotations_text: &str) -> String {
    NARRATION_TEMPLATE.replace("{annotations_text}", annotations_text)
}

/// Locate the JSON array payload inside a possibly fenced / prose-wrapped
/// response. When a code fence is present its content takes priority, so
/// brackets in surrounding prose cannot hijack the array bounds. Returns
/// `(byte offset, payload)`.
fn extract_array(response: &str) -> Result<(usize, &str), NarrationError> {
    let fenced = fenced_region(response).filter(|(_, r)| r.contains('['));
    let (base, region) = fenced.unwrap_or((0, response));
    let start = region.find('[').ok_or(NarrationError::NoArray(base))?;
    let end = region
        .rfind(']')
        .ok_or(NarrationError::NoArray(base + start))?;
    if end < start {
        return Err(NarrationError::NoArray(base + start));
    }
    Ok((base + start, &region[start..=end]))
}

/// The content of the first ``` fence pair, if any, with its byte offset.
fn fenced_region(response: &str) -> Option<(usize, &str)> {
    let open = response.find("```")?;
    let after_marker = open + 3;
    // Skip a language tag such as `json` up to the end of the line.
    let content_start = after_marker + response[after_marker..].find('\n')? + 1;
    let close = response[content_start..].find("```")?;
    Some((
        content_start,
        &response[content_start..content_start + close],
    ))
}

/// Parse a narration response into accepted annotations plus a rejection
/// report. Surrounding whitespace, code fences, and stray prose are stripped;
/// items that violate the annotation invariants are rejected individually.
pub fn parse_narration(response: &str) -> Result<NarrationParse, NarrationError> {
    let (offset, payload) = extract_array(response)?;
    let values: Vec<serde_json::Value> =
        serde_json::from_str(payload).map_err(|e| NarrationError::BadArray {
            offset: offset + byte_offset_of(payload, e.line(), e.column()),
            message: e.to_string(),
        })?;

    let mut out = NarrationParse::default();
    for (index, value) in values.into_iter().enumerate() {
        match serde_json::from_value::<ObjectAnnotation>(value) {
            Ok(mut ann) => {
                ann.label = ann.label.trim().to_lowercase();
                match ann.validate() {
                    Ok(()) => out.accepted.push(ann),
                    Err(reason) => out.rejected.push(RejectedItem { index, reason }),
                }
            }
            Err(e) => out.rejected.push(RejectedItem {
                index,
                reason: e.to_string(),
            }),
        }
    }
    Ok(out)
}

/// Convert serde_json's 1-based line/column into a byte offset.
fn byte_offset_of(text: &str, line: usize, column: usize) -> usize {
    let mut remaining = line.saturating_sub(1);
    let mut offset = 0;
    for (i, b) in text.bytes().enumerate() {
        if remaining == 0 {
            break;
        }
        if b == b'\n' {
            remaining -= 1;
            offset = i + 1;
        }
    }
    offset + column.saturating_sub(1)
}
