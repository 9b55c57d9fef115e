//! Chain-of-thought instruction synthesis and parsing.
//!
//! Synthesis turns a grounded subclip into one user/assistant training pair:
//! the assistant response opens with a deterministic detection block that
//! carries every box coordinate verbatim, followed by the VLM-generated
//! Observations / Analysis / Answer text. Parsing recovers the structured
//! form from such responses, and [`parse_verdict`] implements the baseline
//! response-scoring heuristics used for models that answer in free text.

use crate::geometry::{BinBox, BIN_SCALE};
use crate::grounding::GroundedSet;
use crate::scene_gate::EventTag;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CotError {
    #[error("no Answer section in chain-of-thought text")]
    MissingAnswer,
    #[error("Answer token {0:?} is neither Normal nor Abnormal")]
    InvalidAnswer(String),
    #[error("response does not terminate with \"Answer: {expected}\"")]
    WrongTerminalAnswer { expected: EventTag },
    #[error("response is missing the {0} section header")]
    MissingSection(&'static str),
}

/// The fixed anomaly-aware question every instruction item pairs with.
pub const ANOMALY_QUESTION: &str = "You are a surveillance video analysis expert. Classify the video as Normal or Abnormal strictly using visual evidence. You MUST end your response with 'Answer: Abnormal' or 'Answer: Normal'.";

/// Prefix that separates the detection block from the generated analysis.
pub const ANALYSIS_PREFIX: &str = "Let me analyze this video.";

/// Chain-of-thought generation prompt template. Slots: `{object_context}`,
/// `{annotations_text}`, `{label}`.
pub const COT_TEMPLATE: &str = r#"You are analyzing a surveillance video. The following objects were detected:

{object_context}

Temporal Annotations: {annotations_text}

Coordinates are normalized to [0, 1000] where (0,0) is top-left and (1000,1000) is bottom-right.

The video is labeled: {label}

Write a chain-of-thought analysis. Do NOT start with "Let me analyze this video" — that prefix will be added automatically.

Structure:
- Observations: Describe 2-3 key behaviors you observe, referencing object locations with bounding box coordinates [x1, y1, x2, y2] in [0, 1000] range where available.
- Analysis: Explain your reasoning for classifying this video as {label} with specific details from the observations.
- End with exactly: Answer: {label}

IMPORTANT: Write as if you are directly watching the video. Use phrases like "In the video, I observe..." — do NOT reference temporal annotations, context, input, or any information source. Everything must sound like first-person visual observation.

Be specific and grounded in the detected objects. 3-5 sentences total."#;

/// One user/assistant training pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionItem {
    pub subclip_id: String,
    pub label: EventTag,
    #[serde(rename = "user")]
    pub user_prompt: String,
    #[serde(rename = "assistant")]
    pub assistant_response: String,
}

/// Structured content recovered from a chain-of-thought response.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCot {
    pub observations: String,
    pub analysis: String,
    pub answer: EventTag,
    /// Bracketed integer 4-tuples, each with a best-effort label taken from
    /// the nearest preceding word.
    pub boxes: Vec<(Option<String>, BinBox)>,
    /// Bracketed tuples skipped for out-of-range bins, verbatim.
    pub rejected_boxes: Vec<String>,
}

/// Three-valued verdict for baseline response parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Normal,
    Abnormal,
    Unknown,
}

/// Which baseline heuristic to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictProfile {
    /// Priority-ordered keywords over the whole response.
    KeywordPriority,
    /// Same keywords restricted to the first 80 characters.
    First80,
    /// Read the verdict from a `<which>` tag.
    XmlWhich,
}

/// Canonical object ordering used by the context bullets and the detection
/// block: Abnormal first, then confidence descending, then label.
fn canonical_order(grounded: &GroundedSet) -> Vec<usize> {
    let mut order: Vec<usize> = (0..grounded.objects.len()).collect();
    order.sort_by(|&i, &j| {
        let a = &grounded.objects[i].annotation;
        let b = &grounded.objects[j].annotation;
        b.event
            .is_abnormal()
            .cmp(&a.event.is_abnormal())
            .then(
                b.confidence
                    .partial_cmp(&a.confidence)
                    .unwrap_or(std::cmp::Ordering::Equal),
            )
            .then(a.label.cmp(&b.label))
    });
    order
}

/// Render the object-context bullets fed to the CoT prompt, one per object:
/// `- man at [247, 318, 448, 853]: "aggressive posture" (Abnormal)`,
/// boxless objects without the coordinate clause. Ordering is deterministic:
/// Abnormal first, then confidence descending, then label.
pub fn format_object_context(grounded: &GroundedSet) -> String {
    let order = canonical_order(grounded);
    let mut lines = Vec::with_capacity(order.len());
    for i in order {
        let obj = &grounded.objects[i];
        let ann = &obj.annotation;
        let line = match obj.bbox.as_ref().map(crate::geometry::to_bins) {
            Some(bins) => format!(
                "- {} at [{}, {}, {}, {}]: \"{}\" ({})",
                ann.label, bins.x1, bins.y1, bins.x2, bins.y2, ann.reason, ann.event
            ),
            None => format!("- {}: \"{}\" ({})", ann.label, ann.reason, ann.event),
        };
        lines.push(line);
    }
    lines.join("\n")
}

/// Instantiate the CoT generation prompt.
pub fn build_cot_prompt(object_context: &str, annotations_text: &str, label: EventTag) -> String {
    COT_TEMPLATE
        .replace("{object_context}", object_context)
        .replace("{annotations_text}", annotations_text)
        .replace("{label}", &label.to_string())
}

/// The deterministic detection block: one `DETECTED:` line per boxed object
/// (same canonical ordering as the object context), closed by the analysis
/// prefix. Rendered independently of the VLM so coordinates survive verbatim.
pub fn detection_block(grounded: &GroundedSet) -> String {
    let mut lines = Vec::new();
    for i in canonical_order(grounded) {
        let obj = &grounded.objects[i];
        if let Some(bins) = obj.bbox.as_ref().map(crate::geometry::to_bins) {
            lines.push(format!(
                "DETECTED: {} [{}, {}, {}, {}] ({})",
                obj.annotation.label, bins.x1, bins.y1, bins.x2, bins.y2, obj.annotation.event
            ));
        }
    }
    lines.push(ANALYSIS_PREFIX.to_string());
    lines.join("\n")
}

/// Assemble and validate one instruction item from a grounded subclip and the
/// VLM-generated chain-of-thought text.
///
/// The response must contain the Observations and Analysis headers and
/// terminate with `Answer: {label}`; otherwise the item is rejected.
pub fn compose_item(
    subclip_id: &str,
    label: EventTag,
    grounded: &GroundedSet,
    cot_text: &str,
) -> Result<InstructionItem, CotError> {
    let lower = cot_text.to_lowercase();
    if !lower.contains("observations:") {
        return Err(CotError::MissingSection("Observations"));
    }
    if !lower.contains("analysis:") {
        return Err(CotError::MissingSection("Analysis"));
    }
    let terminal = format!("Answer: {label}");
    if !cot_text.trim_end().ends_with(&terminal) {
        return Err(CotError::WrongTerminalAnswer { expected: label });
    }
    let assistant_response = format!("{}\n\n{}", detection_block(grounded), cot_text.trim());
    Ok(InstructionItem {
        subclip_id: subclip_id.to_string(),
        label,
        user_prompt: ANOMALY_QUESTION.to_string(),
        assistant_response,
    })
}

fn find_header(lower: &str, header: &str, from: usize) -> Option<usize> {
    lower[from..].find(header).map(|p| p + from)
}

/// Words skipped when picking the label for a box out of surrounding prose.
const LABEL_STOPWORDS: [&str; 16] = [
    "at",
    "in",
    "on",
    "the",
    "a",
    "an",
    "of",
    "to",
    "is",
    "are",
    "box",
    "bounding",
    "coordinates",
    "located",
    "with",
    "near",
];

/// Nearest preceding word (alphabetic run of length >= 2, stopwords skipped)
/// within 60 characters of the bracket; best-effort label for a box.
fn label_before(text: &str, bracket_at: usize) -> Option<String> {
    let window_start = text[..bracket_at]
        .char_indices()
        .rev()
        .take(60)
        .last()
        .map(|(i, _)| i)
        .unwrap_or(bracket_at);
    let window = &text[window_start..bracket_at];
    let mut words: Vec<&str> = Vec::new();
    let mut start = None;
    for (i, c) in window.char_indices() {
        if c.is_alphabetic() {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(s) = start.take() {
            words.push(&window[s..i]);
        }
    }
    if let Some(s) = start {
        words.push(&window[s..]);
    }
    words
        .into_iter()
        .rev()
        .map(|w| w.to_lowercase())
        .find(|w| w.chars().count() >= 2 && !LABEL_STOPWORDS.contains(&w.as_str()))
}

/// Parse a chain-of-thought response.
///
/// Sections split on the `Observations:` / `Analysis:` / `Answer:` headers,
/// case-insensitive, first occurrence each, in order; missing Observations or
/// Analysis leave that section empty, a missing Answer is a parse error.
/// Every bracketed integer 4-tuple in the text becomes a box; tuples with a
/// bin above 1000 are skipped and recorded.
pub fn parse_cot(text: &str) -> Result<ParsedCot, CotError> {
    // ASCII case-folding keeps byte offsets aligned with `text`.
    let lower = text.to_ascii_lowercase();
    let obs_pos = find_header(&lower, "observations:", 0);
    let ana_pos = find_header(
        &lower,
        "analysis:",
        obs_pos.map_or(0, |p| p + "observations:".len()),
    );
    let ans_pos = find_header(
        &lower,
        "answer:",
        ana_pos
            .map(|p| p + "analysis:".len())
            .or(obs_pos.map(|p| p + "observations:".len()))
            .unwrap_or(0),
    )
    .ok_or(CotError::MissingAnswer)?;

    let observations = match obs_pos {
        Some(p) => {
            let start = p + "observations:".len();
            let end = ana_pos.unwrap_or(ans_pos);
            text[start..end.max(start)].trim().to_string()
        }
        None => String::new(),
    };
    let analysis = match ana_pos {
        Some(p) => {
            let start = p + "analysis:".len();
            text[start..ans_pos.max(start)].trim().to_string()
        }
        None => String::new(),
    };

    let answer_token: String = text[ans_pos + "answer:".len()..]
        .chars()
        .skip_while(|c| !c.is_alphabetic())
        .take_while(|c| c.is_alphabetic())
        .collect();
    let answer = match answer_token.to_lowercase().as_str() {
        "abnormal" => EventTag::Abnormal,
        "normal" => EventTag::Normal,
        "" => return Err(CotError::MissingAnswer),
        other => return Err(CotError::InvalidAnswer(other.to_string())),
    };

    let tuple_re = regex_for_tuples();
    let mut boxes = Vec::new();
    let mut rejected_boxes = Vec::new();
    for caps in tuple_re.captures_iter(text) {
        let whole = caps.get(0).unwrap();
        let mut vals = [0u32; 4];
        let mut ok = true;
        for (slot, val) in vals.iter_mut().enumerate() {
            match caps[slot + 1].parse::<u32>() {
                Ok(v) if v <= BIN_SCALE => *val = v,
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            rejected_boxes.push(whole.as_str().to_string());
            continue;
        }
        let bins = BinBox {
            x1: vals[0],
            y1: vals[1],
            x2: vals[2],
            y2: vals[3],
        };
        boxes.push((label_before(text, whole.start()), bins));
    }

    Ok(ParsedCot {
        observations,
        analysis,
        answer,
        boxes,
        rejected_boxes,
    })
}

fn regex_for_tuples() -> &'static regex::Regex {
    use std::sync::OnceLock;
    static RE: OnceLock<regex::Regex> = OnceLock::new();
    RE.get_or_init(|| {
        regex::Regex::new(r"\[\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*\]").unwrap()
    })
}

const NEGATORS: [&str; 8] = [
    "no", "not", "without", "none", "never", "neither", "nothing", "non",
];

fn keyword_verdict(text: &str) -> Verdict {
    let lower = text.to_lowercase();
    let words: Vec<&str> = lower
        .split(|c: char| !c.is_alphabetic())
        .filter(|w| !w.is_empty())
        .collect();
    let negated = |i: usize| i > 0 && NEGATORS.contains(&words[i - 1]);

    // Explicit keywords first, in text order.
    for (i, w) in words.iter().enumerate() {
        match *w {
            "yes" => return Verdict::Abnormal,
            "abnormal" if !negated(i) => return Verdict::Abnormal,
            "no" => return Verdict::Normal,
            "normal" if !negated(i) => return Verdict::Normal,
            _ => {}
        }
    }
    // Fallback terms, excluding negated forms.
    for (i, w) in words.iter().enumerate() {
        if (w.contains("anomal") || w.contains("unusual") || w.contains("suspicious"))
            && !negated(i)
        {
            return Verdict::Abnormal;
        }
    }
    Verdict::Unknown
}

/// Total verdict extraction from arbitrary response text.
pub fn parse_verdict(text: &str, profile: VerdictProfile) -> Verdict {
    match profile {
        VerdictProfile::KeywordPriority => keyword_verdict(text),
        VerdictProfile::First80 => {
            let head: String = text.chars().take(80).collect();
            keyword_verdict(&head)
        }
        VerdictProfile::XmlWhich => {
            let lower = text.to_lowercase();
            let Some(open) = lower.find("<which>") else {
                return Verdict::Unknown;
            };
            let Some(close) = lower[open..].find("</which>") else {
                return Verdict::Unknown;
            };
            let inner = &lower[open + "<which>".len()..open + close];
            if inner.contains("abnormal") {
                Verdict::Abnormal
            } else if inner.contains("normal") {
                Verdict::Normal
            } else {
                Verdict::Unknown
            }
        }
    }
}

/// Fraction of windows predicting abnormal.
pub fn window_score(verdicts: &[Verdict]) -> f64 {
    if verdicts.is_empty() {
        return 0.0;
    }
    let abnormal = verdicts.iter().filter(|v| **v == Verdict::Abnormal).count();
    abnormal as f64 / verdicts.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;
    use crate::grounding::GroundedObject;
    use crate::narration::ObjectAnnotation;

    fn ann(label: &str, event: EventTag, reason: &str, confidence: f64) -> ObjectAnnotation {
        ObjectAnnotation {
            event,
            reason: reason.into(),
            label: label.into(),
            confidence,
        }
    }

    fn bin_box(x1: u32, y1: u32, x2: u32, y2: u32) -> BBox {
        crate::geometry::from_bins(&crate::geometry::BinBox::new(x1, y1, x2, y2).unwrap()).unwrap()
    }

    fn grounded_example() -> GroundedSet {
        let man = GroundedObject {
            annotation: ann("man", EventTag::Abnormal, "aggressive posture", 0.93),
            bbox: Some(bin_box(247, 318, 448, 853)),
            det_confidence: Some(0.88),
            anchor_frame: Some(601),
        };
        let ladder = GroundedObject {
            annotation: ann("ladder", EventTag::Normal, "leaning against the wall", 0.8),
            bbox: Some(bin_box(661, 131, 804, 455)),
            det_confidence: Some(0.61),
            anchor_frame: Some(601),
        };
        let wall =
            GroundedObject::ungrounded(ann("wall", EventTag::Normal, "static background", 0.7));
        GroundedSet {
            subclip_id: "v0:0-601".into(),
            anchor_frame: 601,
            objects: vec![ladder, wall, man],
        }
    }

    #[test]
    fn object_context_bullet_shape_and_order() {
        let ctx = format_object_context(&grounded_example());
        let lines: Vec<&str> = ctx.lines().collect();
        assert_eq!(
            lines[0],
            "- man at [247, 318, 448, 853]: \"aggressive posture\" (Abnormal)"
        );
        assert_eq!(
            lines[1],
            "- ladder at [661, 131, 804, 455]: \"leaning against the wall\" (Normal)"
        );
        assert_eq!(lines[2], "- wall: \"static background\" (Normal)");
    }

    #[test]
    fn object_context_empty_set() {
        let set = GroundedSet {
            subclip_id: "s".into(),
            anchor_frame: 0,
            objects: vec![],
        };
        assert_eq!(format_object_context(&set), "");
    }

    #[test]
    fn object_context_distinguishes_every_field() {
        // Injective on (label, bins, reason, event): changing any one of
        // them changes the rendered context.
        type Mutation = Box<dyn Fn(&mut GroundedSet)>;
        let base = grounded_example();
        let ctx = format_object_context(&base);
        let mutations: Vec<Mutation> = vec![
            Box::new(|s| s.objects[0].annotation.label = "men".into()),
            Box::new(|s| s.objects[0].annotation.reason = "different reason".into()),
            Box::new(|s| s.objects[0].annotation.event = EventTag::Abnormal),
            Box::new(|s| s.objects[0].bbox = Some(bin_box(661, 131, 804, 456))),
            Box::new(|s| s.objects[0].bbox = None),
        ];
        for (i, mutate) in mutations.iter().enumerate() {
            let mut changed = base.clone();
            mutate(&mut changed);
            assert_ne!(
                format_object_context(&changed),
                ctx,
                "mutation {i} must show up"
            );
        }
    }

    #[test]
    fn cot_prompt_fills_slots() {
        let prompt = build_cot_prompt(
            "- man at [1, 2, 3, 4]: \"x\" (Abnormal)",
            "someone walks",
            EventTag::Abnormal,
        );
        assert!(prompt.contains("- man at [1, 2, 3, 4]"));
        assert!(prompt.contains("Temporal Annotations: someone walks"));
        assert!(prompt.contains("The video is labeled: Abnormal"));
        assert!(prompt.contains("End with exactly: Answer: Abnormal"));
        assert!(!prompt.contains('{'), "no unexpanded slots");
    }

    #[test]
    fn cot_prompt_normal_label() {
        let prompt = build_cot_prompt("", "", EventTag::Normal);
        assert!(prompt.contains("End with exactly: Answer: Normal"));
    }

    #[test]
    fn detection_block_lines() {
        let block = detection_block(&grounded_example());
        let lines: Vec<&str> = block.lines().collect();
        assert_eq!(lines[0], "DETECTED: man [247, 318, 448, 853] (Abnormal)");
        assert_eq!(lines[1], "DETECTED: ladder [661, 131, 804, 455] (Normal)");
        assert_eq!(lines[2], ANALYSIS_PREFIX);
    }

    const PAPER_COT: &str = "Observations: I observe a man in a white shirt physically restraining another man in a blue shirt, with the blue-shirted man's bounding box at [456, 559, 634, 849], indicating forceful contact. The white-shirted man's action is clearly aggressive, as he holds the blue-shirted man in place. A metal ladder at [661, 131, 804, 455] remains stationary and uninvolved, while the floor and wall show no signs of disturbance.\n\nAnalysis: The physical restraint between the two men is a clear indicator of violent behavior, which deviates from normal activity in the scene. The presence of aggressive physical interaction, combined with the stationary background elements, reinforces that the event is anomalous and potentially dangerous. No other objects or movements suggest a non-violent context.\n\nAnswer: Abnormal";

    #[test]
    fn parses_reference_generated_response() {
        let parsed = parse_cot(PAPER_COT).unwrap();
        assert_eq!(parsed.answer, EventTag::Abnormal);
        let bins: Vec<[u32; 4]> = parsed.boxes.iter().map(|(_, b)| b.as_array()).collect();
        assert_eq!(bins, vec![[456, 559, 634, 849], [661, 131, 804, 455]]);
        assert_eq!(parsed.boxes[1].0.as_deref(), Some("ladder"));
        assert!(parsed.observations.starts_with("I observe a man"));
        assert!(parsed.analysis.starts_with("The physical restraint"));
    }

    #[test]
    fn parses_bare_answer() {
        let parsed = parse_cot("Answer: Normal").unwrap();
        assert_eq!(parsed.answer, EventTag::Normal);
        assert!(parsed.observations.is_empty());
        assert!(parsed.analysis.is_empty());
        assert!(parsed.boxes.is_empty());
    }

    #[test]
    fn out_of_range_tuple_is_skipped_not_fatal() {
        let text = "Observations: boxes [12, 5000, 3, 4] and [1, 2, 3, 4].\nAnalysis: fine.\nAnswer: Normal";
        let parsed = parse_cot(text).unwrap();
        assert_eq!(parsed.boxes.len(), 1);
        assert_eq!(parsed.boxes[0].1.as_array(), [1, 2, 3, 4]);
        assert_eq!(parsed.rejected_boxes.len(), 1);
        assert!(parsed.rejected_boxes[0].contains("5000"));
    }

    #[test]
    fn missing_answer_is_an_error() {
        assert_eq!(
            parse_cot("Observations: x\nAnalysis: y"),
            Err(CotError::MissingAnswer)
        );
    }

    #[test]
    fn invalid_answer_token_is_an_error() {
        assert_eq!(
            parse_cot("Answer: maybe"),
            Err(CotError::InvalidAnswer("maybe".to_string()))
        );
    }

    #[test]
    fn compose_item_round_trips_detection_block() {
        let grounded = grounded_example();
        let item = compose_item("v0:0-601", EventTag::Abnormal, &grounded, PAPER_COT).unwrap();
        assert!(item
            .assistant_response
            .starts_with("DETECTED: man [247, 318, 448, 853] (Abnormal)"));
        assert!(item.assistant_response.contains(ANALYSIS_PREFIX));
        assert_eq!(item.user_prompt, ANOMALY_QUESTION);

        let parsed = parse_cot(&item.assistant_response).unwrap();
        assert_eq!(parsed.answer, EventTag::Abnormal);
        let bins: Vec<[u32; 4]> = parsed.boxes.iter().map(|(_, b)| b.as_array()).collect();
        // Detection-block boxes first, then the boxes the analysis mentions.
        assert!(bins.contains(&[247, 318, 448, 853]));
        assert!(bins.contains(&[661, 131, 804, 455]));
        assert!(bins.contains(&[456, 559, 634, 849]));
    }

    #[test]
    fn compose_item_rejects_missing_terminal_answer() {
        let grounded = grounded_example();
        let err = compose_item(
            "s",
            EventTag::Abnormal,
            &grounded,
            "Observations: x\nAnalysis: y\nso it ends",
        )
        .unwrap_err();
        assert_eq!(
            err,
            CotError::WrongTerminalAnswer {
                expected: EventTag::Abnormal
            }
        );
    }

    #[test]
    fn compose_item_rejects_wrong_label_answer() {
        let grounded = grounded_example();
        let text = "Observations: x\nAnalysis: y\nAnswer: Normal";
        assert!(compose_item("s", EventTag::Abnormal, &grounded, text).is_err());
    }

    #[test]
    fn compose_item_empty_grounding_still_requires_cot() {
        let set = GroundedSet {
            subclip_id: "s".into(),
            anchor_frame: 5,
            objects: vec![],
        };
        let text = "Observations: nothing notable.\nAnalysis: routine scene.\nAnswer: Normal";
        let item = compose_item("s", EventTag::Normal, &set, text).unwrap();
        assert!(item.assistant_response.starts_with(ANALYSIS_PREFIX));
        assert!(compose_item("s", EventTag::Normal, &set, "Answer: Normal").is_err());
    }

    #[test]
    fn verdict_keyword_priority() {
        assert_eq!(
            parse_verdict("Yes, there is a fight", VerdictProfile::KeywordPriority),
            Verdict::Abnormal
        );
        assert_eq!(
            parse_verdict("No abnormal events.", VerdictProfile::KeywordPriority),
            Verdict::Normal
        );
        assert_eq!(
            parse_verdict("The scene looks normal.", VerdictProfile::KeywordPriority),
            Verdict::Normal
        );
        assert_eq!(
            parse_verdict(
                "There is something suspicious near the gate",
                VerdictProfile::KeywordPriority
            ),
            Verdict::Abnormal
        );
        assert_eq!(
            parse_verdict("Nothing unusual to report", VerdictProfile::KeywordPriority),
            Verdict::Unknown,
            "negated fallback form is excluded"
        );
        assert_eq!(
            parse_verdict("", VerdictProfile::KeywordPriority),
            Verdict::Unknown
        );
    }

    #[test]
    fn verdict_first80_ignores_late_keywords() {
        let text = format!("{}abnormal", " ".repeat(100));
        assert_eq!(
            parse_verdict(&text, VerdictProfile::First80),
            Verdict::Unknown
        );
        assert_eq!(
            parse_verdict(&text, VerdictProfile::KeywordPriority),
            Verdict::Abnormal
        );
        assert_eq!(
            parse_verdict("Abnormal activity seen.", VerdictProfile::First80),
            Verdict::Abnormal
        );
    }

    #[test]
    fn verdict_xml_which() {
        assert_eq!(
            parse_verdict("<which>Abnormal</which>", VerdictProfile::XmlWhich),
            Verdict::Abnormal
        );
        assert_eq!(
            parse_verdict(
                "<answer><which>Normal</which><what>...</what></answer>",
                VerdictProfile::XmlWhich
            ),
            Verdict::Normal
        );
        assert_eq!(
            parse_verdict("no tags here", VerdictProfile::XmlWhich),
            Verdict::Unknown
        );
    }

    #[test]
    fn verdict_total_on_arbitrary_bytes() {
        for chunk in ["\u{0}\u{1}\u{2}", "ÿþ", "<which>", "[[[", "答案"] {
            let _ = parse_verdict(chunk, VerdictProfile::KeywordPriority);
            let _ = parse_verdict(chunk, VerdictProfile::First80);
            let _ = parse_verdict(chunk, VerdictProfile::XmlWhich);
        }
    }

    #[test]
    fn window_score_counts_abnormal_fraction() {
        use Verdict::*;
        assert_eq!(
            window_score(&[Abnormal, Abnormal, Normal, Normal, Normal]),
            0.4
        );
        assert_eq!(window_score(&[Normal, Normal]), 0.0);
        assert_eq!(window_score(&[Abnormal; 3]), 1.0);
        assert_eq!(window_score(&[]), 0.0);
    }
}
