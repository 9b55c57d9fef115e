//! Dataset statistics mirroring the three phase reports: subclipping,
//! object grounding, and chain-of-thought annotation.

use crate::cot::{self, InstructionItem};
use crate::grounding::GroundedSet;
use crate::scene_gate::{EventTag, SubclipRecord};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Nearest-rank percentile (1-based rank `ceil(p/100 * n)`); data is sorted
/// internally. Returns 0 for empty input.
pub fn percentile_nearest_rank(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// Conventional median: middle element, or the mean of the two middles.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Subclipping statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase1Stats {
    pub videos: usize,
    pub videos_normal: usize,
    pub videos_abnormal: usize,
    pub total_subclips: usize,
    pub subclips_normal: usize,
    pub subclips_abnormal: usize,
    pub subclips_per_video_mean: f64,
    pub subclips_per_video_median: f64,
    pub duration_median_s: f64,
    pub duration_p25_s: f64,
    pub duration_p75_s: f64,
    pub frac_under_10s: f64,
    pub frac_under_30s: f64,
    pub frac_under_60s: f64,
}

impl Phase1Stats {
    pub fn compute(subclips: &[SubclipRecord], fps: f64) -> Self {
        let mut per_video: BTreeMap<&str, (usize, bool)> = BTreeMap::new();
        for s in subclips {
            let entry = per_video.entry(s.video_id.as_str()).or_insert((0, false));
            entry.0 += 1;
            entry.1 |= s.label.is_abnormal();
        }
        let counts: Vec<f64> = per_video.values().map(|(c, _)| *c as f64).collect();
        let durations: Vec<f64> = subclips
            .iter()
            .map(|s| s.len_frames() as f64 / fps.max(1e-9))
            .collect();
        let frac_under = |limit: f64| {
            if durations.is_empty() {
                0.0
            } else {
                durations.iter().filter(|d| **d <= limit).count() as f64 / durations.len() as f64
            }
        };
        let abnormal_videos = per_video.values().filter(|(_, ab)| *ab).count();
        Phase1Stats {
            videos: per_video.len(),
            videos_normal: per_video.len() - abnormal_videos,
            videos_abnormal: abnormal_videos,
            total_subclips: subclips.len(),
            subclips_normal: subclips.iter().filter(|s| !s.label.is_abnormal()).count(),
            subclips_abnormal: subclips.iter().filter(|s| s.label.is_abnormal()).count(),
            subclips_per_video_mean: mean(&counts),
            subclips_per_video_median: median(&counts),
            duration_median_s: median(&durations),
            duration_p25_s: percentile_nearest_rank(&durations, 25.0),
            duration_p75_s: percentile_nearest_rank(&durations, 75.0),
            frac_under_10s: frac_under(10.0),
            frac_under_30s: frac_under(30.0),
            frac_under_60s: frac_under(60.0),
        }
    }
}

/// Object grounding statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase2Stats {
    pub total_samples: usize,
    pub samples_normal: usize,
    pub samples_abnormal: usize,
    pub total_objects: usize,
    pub unique_labels: usize,
    pub singleton_labels: usize,
    pub rare_labels_2_to_5: usize,
    pub objects_per_subclip_mean: f64,
    pub objects_per_subclip_median: f64,
    pub grounded_per_subclip_mean: f64,
    pub grounded_per_subclip_median: f64,
    pub grounding_rate: f64,
    pub frac_subclips_no_grounding: f64,
    /// Top labels by instance count: (label, count).
    pub most_frequent: Vec<(String, usize)>,
    /// Labels with the highest ungrounded rate among those with at least 20
    /// instances: (label, ungrounded, total).
    pub highest_ungrounded: Vec<(String, usize, usize)>,
}

impl Phase2Stats {
    pub fn compute(sets: &[(EventTag, GroundedSet)]) -> Self {
        let mut label_counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new(); // total, ungrounded
        let mut objects_per: Vec<f64> = Vec::new();
        let mut grounded_per: Vec<f64> = Vec::new();
        let mut total_objects = 0usize;
        let mut total_grounded = 0usize;
        let mut none_grounded = 0usize;
        for (_, set) in sets {
            objects_per.push(set.objects.len() as f64);
            let grounded = set.grounded_count();
            grounded_per.push(grounded as f64);
            total_objects += set.objects.len();
            total_grounded += grounded;
            if grounded == 0 && !set.objects.is_empty() {
                none_grounded += 1;
            }
            for o in &set.objects {
                let entry = label_counts
                    .entry(o.annotation.label.as_str())
                    .or_insert((0, 0));
                entry.0 += 1;
                if !o.is_grounded() {
                    entry.1 += 1;
                }
            }
        }

        let mut by_count: Vec<(&str, usize)> =
            label_counts.iter().map(|(l, (t, _))| (*l, *t)).collect();
        by_count.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let most_frequent = by_count
            .iter()
            .take(9)
            .map(|(l, c)| (l.to_string(), *c))
            .collect::<Vec<_>>();

        let mut ungrounded: Vec<(&str, usize, usize)> = label_counts
            .iter()
            .filter(|(_, (t, _))| *t >= 20)
            .map(|(l, (t, u))| (*l, *u, *t))
            .collect();
        ungrounded.sort_by(|a, b| {
            let ra = a.1 as f64 / a.2 as f64;
            let rb = b.1 as f64 / b.2 as f64;
            rb.partial_cmp(&ra)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.0.cmp(b.0))
        });
        let highest_ungrounded = ungrounded
            .iter()
            .take(10)
            .map(|(l, u, t)| (l.to_string(), *u, *t))
            .collect();

        Phase2Stats {
            total_samples: sets.len(),
            samples_normal: sets.iter().filter(|(l, _)| !l.is_abnormal()).count(),
            samples_abnormal: sets.iter().filter(|(l, _)| l.is_abnormal()).count(),
            total_objects,
            unique_labels: label_counts.len(),
            singleton_labels: label_counts.values().filter(|(t, _)| *t == 1).count(),
            rare_labels_2_to_5: label_counts
                .values()
                .filter(|(t, _)| (2..=5).contains(t))
                .count(),
            objects_per_subclip_mean: mean(&objects_per),
            objects_per_subclip_median: median(&objects_per),
            grounded_per_subclip_mean: mean(&grounded_per),
            grounded_per_subclip_median: median(&grounded_per),
            grounding_rate: if total_objects == 0 {
                0.0
            } else {
                total_grounded as f64 / total_objects as f64
            },
            frac_subclips_no_grounding: if sets.is_empty() {
                0.0
            } else {
                none_grounded as f64 / sets.len() as f64
            },
            most_frequent,
            highest_ungrounded,
        }
    }
}

/// Chain-of-thought annotation statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase3Stats {
    pub total_items: usize,
    pub answers_normal: usize,
    pub answers_abnormal: usize,
    pub completeness_observations: f64,
    pub completeness_analysis: f64,
    pub completeness_answer: f64,
    pub words_mean: f64,
    pub words_median: f64,
    pub words_p25: f64,
    pub words_p75: f64,
    pub chars_mean: f64,
    pub chars_median: f64,
    pub observation_words_mean: f64,
    pub observation_words_median: f64,
    pub analysis_words_mean: f64,
    pub analysis_words_median: f64,
    pub boxes_per_item_mean: f64,
    pub boxes_per_item_median: f64,
    pub frac_items_with_box: f64,
}

impl Phase3Stats {
    pub fn compute(items: &[InstructionItem]) -> Self {
        let n = items.len();
        let mut words = Vec::new();
        let mut chars = Vec::new();
        let mut obs_words = Vec::new();
        let mut ana_words = Vec::new();
        let mut boxes = Vec::new();
        let mut complete = [0usize; 3];
        let mut answers_abnormal = 0usize;
        let mut with_box = 0usize;
        let count_words = |text: &str| text.split_whitespace().count() as f64;
        for item in items {
            let text = &item.assistant_response;
            words.push(count_words(text));
            chars.push(text.chars().count() as f64);
            match cot::parse_cot(text) {
                Ok(parsed) => {
                    if !parsed.observations.is_empty() {
                        complete[0] += 1;
                        obs_words.push(count_words(&parsed.observations));
                    }
                    if !parsed.analysis.is_empty() {
                        complete[1] += 1;
                        ana_words.push(count_words(&parsed.analysis));
                    }
                    complete[2] += 1;
                    if parsed.answer.is_abnormal() {
                        answers_abnormal += 1;
                    }
                    boxes.push(parsed.boxes.len() as f64);
                    if !parsed.boxes.is_empty() {
                        with_box += 1;
                    }
                }
                Err(_) => boxes.push(0.0),
            }
        }
        let frac = |c: usize| if n == 0 { 0.0 } else { c as f64 / n as f64 };
        Phase3Stats {
            total_items: n,
            answers_normal: complete[2] - answers_abnormal,
            answers_abnormal,
            completeness_observations: frac(complete[0]),
            completeness_analysis: frac(complete[1]),
            completeness_answer: frac(complete[2]),
            words_mean: mean(&words),
            words_median: median(&words),
            words_p25: percentile_nearest_rank(&words, 25.0),
            words_p75: percentile_nearest_rank(&words, 75.0),
            chars_mean: mean(&chars),
            chars_median: median(&chars),
            observation_words_mean: mean(&obs_words),
            observation_words_median: median(&obs_words),
            analysis_words_mean: mean(&ana_words),
            analysis_words_median: median(&ana_words),
            boxes_per_item_mean: mean(&boxes),
            boxes_per_item_median: median(&boxes),
            frac_items_with_box: frac(with_box),
        }
    }
}

/// Combined per-phase statistics report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase1: Option<Phase1Stats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase2: Option<Phase2Stats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase3: Option<Phase3Stats>,
}
