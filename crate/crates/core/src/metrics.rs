//! Classification and spatial-grounding evaluation.
//!
//! Classification: ROC-AUC (Mann-Whitney, ties credited 0.5), average
//! precision, accuracy/precision/recall/F1 with Abnormal as the positive
//! class, and a per-category breakdown. Grounding: mean best-match IoU via
//! greedy assignment and recall at an IoU threshold. Frame-level protocols
//! are served by interval rasterization with Gaussian smoothing.

use crate::cot::Verdict;
use crate::geometry::{self, BBox};
use crate::scene_gate::EventTag;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("metric undefined: {0}")]
    Undefined(&'static str),
    #[error("both classes must be present")]
    SingleClass,
    #[error("record {id}: {reason}")]
    InvalidRecord { id: String, reason: String },
    #[error("record {0} carries neither a score nor a verdict")]
    MissingPrediction(String),
}

/// One evaluation sample on the wire. Boxes are normalized `[x1,y1,x2,y2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub label: EventTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred_boxes: Option<Vec<[f64; 4]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_boxes: Option<Vec<[f64; 4]>>,
}

impl EvalRecord {
    pub fn validate(&self) -> Result<(), MetricError> {
        if let Some(s) = self.score {
            if !(0.0..=1.0).contains(&s) {
                return Err(MetricError::InvalidRecord {
                    id: self.id.clone(),
                    reason: format!("score {s} outside [0,1]"),
                });
            }
        }
        for boxes in [&self.pred_boxes, &self.gt_boxes].into_iter().flatten() {
            for b in boxes {
                BBox::new(b[0], b[1], b[2], b[3]).map_err(|e| MetricError::InvalidRecord {
                    id: self.id.clone(),
                    reason: e.to_string(),
                })?;
            }
        }
        Ok(())
    }

    /// Effective binary prediction: the explicit verdict when present,
    /// otherwise score thresholded at 0.5.
    pub fn predicted_abnormal(&self) -> Result<bool, MetricError> {
        match (self.verdict, self.score) {
            (Some(v), _) => Ok(v == Verdict::Abnormal),
            (None, Some(s)) => Ok(s >= 0.5),
            (None, None) => Err(MetricError::MissingPrediction(self.id.clone())),
        }
    }
}

/// ROC-AUC as the Mann-Whitney statistic: the fraction of (positive,
/// negative) pairs ranked correctly, ties counted 0.5. Computed via midranks.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(MetricError::Undefined(
            "roc_auc needs matching, non-empty inputs",
        ));
    }
    let n_pos = labels.iter().filter(|l| **l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| {
        scores[i]
            .partial_cmp(&scores[j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    // Midranks over tie groups.
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0; // average of ranks i+1 ..= j
        for &idx in &order[i..j] {
            if labels[idx] {
                rank_sum_pos += midrank;
            }
        }
        i = j;
    }
    let auc = (rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0) / (n_pos as f64 * n_neg as f64);
    Ok(auc)
}

/// Average precision: step-wise sum of precision times recall increments over
/// descending score thresholds, tie groups advancing together.
pub fn pr_auc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(MetricError::Undefined(
            "pr_auc needs matching, non-empty inputs",
        ));
    }
    let n_pos = labels.iter().filter(|l| **l).count();
    if n_pos == 0 {
        return Err(MetricError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| {
        scores[j]
            .partial_cmp(&scores[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut ap = 0.0;
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut prev_recall = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        for &idx in &order[i..j] {
            if labels[idx] {
                tp += 1;
            }
        }
        seen += j - i;
        let recall = tp as f64 / n_pos as f64;
        let precision = tp as f64 / seen as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    Ok(ap)
}

/// Precision/recall/F1/accuracy with Abnormal as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        return 0.0;
    }
    2.0 * precision * recall / (precision + recall)
}

/// Standard confusion-matrix metrics. `Unknown` verdicts count as Normal
/// predictions.
pub fn prf_accuracy(verdicts: &[Verdict], labels: &[bool]) -> Result<Prf, MetricError> {
    if verdicts.len() != labels.len() || verdicts.is_empty() {
        return Err(MetricError::Undefined(
            "prf needs matching, non-empty inputs",
        ));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (v, &label) in verdicts.iter().zip(labels) {
        let predicted = *v == Verdict::Abnormal;
        match (predicted, label) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    Ok(Prf {
        precision,
        recall,
        f1: f1_score(precision, recall),
        accuracy: (tp + tn) as f64 / verdicts.len() as f64,
    })
}

/// Per-sample box lists for the grounding metrics.
#[derive(Debug, Clone, Default)]
pub struct BoxSample {
    pub preds: Vec<BBox>,
    pub gts: Vec<BBox>,
}

/// Mean best-match IoU across samples: greedy assignment per sample, matched
/// IoUs pooled; with `penalize_unmatched` every unmatched ground-truth box
/// contributes 0 to the pool. An empty pool scores 0.
pub fn mean_iou(samples: &[BoxSample], penalize_unmatched: bool) -> f64 {
    let mut pool: Vec<f64> = Vec::new();
    for s in samples {
        let matches = geometry::greedy_best_match(&s.preds, &s.gts);
        let matched_gts: std::collections::HashSet<usize> = matches.iter().map(|m| m.gt).collect();
        pool.extend(matches.iter().map(|m| m.iou));
        if penalize_unmatched {
            pool.extend(
                (0..s.gts.len())
                    .filter(|g| !matched_gts.contains(g))
                    .map(|_| 0.0),
            );
        }
    }
    if pool.is_empty() {
        return 0.0;
    }
    pool.iter().sum::<f64>() / pool.len() as f64
}

/// Fraction of ground-truth boxes greedily matched above `threshold` IoU.
/// Errors when there are no ground-truth boxes at all.
pub fn recall_at(samples: &[BoxSample], threshold: f64) -> Result<f64, MetricError> {
    let total_gts: usize = samples.iter().map(|s| s.gts.len()).sum();
    if total_gts == 0 {
        return Err(MetricError::Undefined(
            "recall_at has no ground-truth boxes",
        ));
    }
    let mut hit = 0usize;
    for s in samples {
        hit += geometry::greedy_best_match(&s.preds, &s.gts)
            .iter()
            .filter(|m| m.iou > threshold)
            .count();
    }
    Ok(hit as f64 / total_gts as f64)
}

/// One abnormal-category row of the per-category report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub category: String,
    pub total: usize,
    pub tp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    pub recall: f64,
}

/// The Normal pool row: accuracy is the true-negative rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalRow {
    pub total: usize,
    pub tn: usize,
    pub fp: usize,
    pub accuracy: f64,
}

/// Per-category anomaly detection breakdown. Categories come from the record
/// tags; abnormal records without a category are pooled under "Uncategorized",
/// empty categories simply do not appear.
pub fn per_category_report(
    records: &[EvalRecord],
) -> Result<(Vec<CategoryRow>, Option<NormalRow>), MetricError> {
    use std::collections::BTreeMap;
    let mut abnormal: BTreeMap<String, (usize, usize)> = BTreeMap::new(); // total, tp
    let mut normal: Option<(usize, usize)> = None; // total, tn
    for r in records {
        let predicted = r.predicted_abnormal()?;
        if r.label.is_abnormal() {
            let cat = r
                .category
                .clone()
                .unwrap_or_else(|| "Uncategorized".to_string());
            let entry = abnormal.entry(cat).or_insert((0, 0));
            entry.0 += 1;
            if predicted {
                entry.1 += 1;
            }
        } else {
            let entry = normal.get_or_insert((0, 0));
            entry.0 += 1;
            if !predicted {
                entry.1 += 1;
            }
        }
    }
    let rows = abnormal
        .into_iter()
        .map(|(category, (total, tp))| CategoryRow {
            category,
            total,
            tp,
            fn_: total - tp,
            accuracy: tp as f64 / total as f64,
            recall: tp as f64 / total as f64,
        })
        .collect();
    let normal_row = normal.map(|(total, tn)| NormalRow {
        total,
        tn,
        fp: total - tn,
        accuracy: tn as f64 / total as f64,
    });
    Ok((rows, normal_row))
}

/// Rasterize predicted intervals (start/end as fractions of the video, with a
/// score each) onto `n_frames` frames, overlaps combined by max, then smooth
/// with a Gaussian of standard deviation `sigma` frames (kernel truncated at
/// four sigma, renormalized at the boundaries) and clamp to [0, 1].
pub fn interval_to_frame_scores(
    intervals: &[(f64, f64, f64)],
    n_frames: usize,
    sigma: f64,
) -> Vec<f64> {
    if n_frames == 0 {
        return Vec::new();
    }
    let mut raw = vec![0.0f64; n_frames];
    for &(start, end, score) in intervals {
        if end < start {
            continue;
        }
        let lo = ((start.max(0.0) * n_frames as f64).floor() as usize).min(n_frames - 1);
        let hi = ((end.min(1.0) * n_frames as f64).ceil() as usize).clamp(lo + 1, n_frames);
        for v in &mut raw[lo..hi] {
            *v = v.max(score);
        }
    }
    if sigma <= 0.0 {
        for v in &mut raw {
            *v = v.clamp(0.0, 1.0);
        }
        return raw;
    }

    let half = (4.0 * sigma).ceil() as isize;
    let weight = |d: isize| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp();
    let mut out = vec![0.0f64; n_frames];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        let mut norm = 0.0;
        for d in -half..=half {
            let j = i as isize + d;
            if j < 0 || j >= n_frames as isize {
                continue;
            }
            let w = weight(d);
            acc += w * raw[j as usize];
            norm += w;
        }
        *o = (acc / norm).clamp(0.0, 1.0);
    }
    out
}

/// Full classification report plus optional grounding metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pr_auc: Option<f64>,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_iou: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_at_25: Option<f64>,
    pub categories: Vec<CategoryRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normal_row: Option<NormalRow>,
}

/// Build the classification half of the report from eval records. AUCs are
/// filled when every record carries a score and both classes are present.
pub fn classification_report(records: &[EvalRecord]) -> Result<EvalReport, MetricError> {
    if records.is_empty() {
        return Err(MetricError::Undefined("no records"));
    }
    for r in records {
        r.validate()?;
    }
    let labels: Vec<bool> = records.iter().map(|r| r.label.is_abnormal()).collect();
    let verdicts: Vec<Verdict> = records
        .iter()
        .map(|r| {
            r.predicted_abnormal().map(|p| {
                if p {
                    Verdict::Abnormal
                } else {
                    Verdict::Normal
                }
            })
        })
        .collect::<Result<_, _>>()?;
    let prf = prf_accuracy(&verdicts, &labels)?;

    let scores: Option<Vec<f64>> = records.iter().map(|r| r.score).collect();
    let (auc, pr) = match scores {
        Some(s) => (roc_auc(&s, &labels).ok(), pr_auc(&s, &labels).ok()),
        None => (None, None),
    };

    let (categories, normal_row) = per_category_report(records)?;
    Ok(EvalReport {
        auc,
        pr_auc: pr,
        accuracy: prf.accuracy,
        precision: prf.precision,
        recall: prf.recall,
        f1: prf.f1,
        mean_iou: None,
        r_at_25: None,
        categories,
        normal_row,
    })
}

/// Grounding metrics over the records that carry boxes. Per the evaluation
/// protocol, only abnormal samples enter the pool.
pub fn grounding_report(
    records: &[EvalRecord],
    penalize_unmatched: bool,
    recall_threshold: f64,
) -> Result<(f64, f64), MetricError> {
    let mut samples = Vec::new();
    for r in records {
        if !r.label.is_abnormal() {
            continue;
        }
        let to_boxes = |arrs: &Option<Vec<[f64; 4]>>| -> Result<Vec<BBox>, MetricError> {
            arrs.as_deref()
                .unwrap_or(&[])
                .iter()
                .map(|b| {
                    BBox::new(b[0], b[1], b[2], b[3]).map_err(|e| MetricError::InvalidRecord {
                        id: r.id.clone(),
                        reason: e.to_string(),
                    })
                })
                .collect()
        };
        let gts = to_boxes(&r.gt_boxes)?;
        if gts.is_empty() && r.gt_boxes.is_none() {
            continue; // sample carries no grounding annotation
        }
        samples.push(BoxSample {
            preds: to_boxes(&r.pred_boxes)?,
            gts,
        });
    }
    let miou = mean_iou(&samples, penalize_unmatched);
    let recall = recall_at(&samples, recall_threshold)?;
    Ok((miou, recall))
}

/// Aligned-text rendering of a report, one metric per line plus the category
/// table.
pub fn render_report(report: &EvalReport) -> String {
    let mut out = String::new();
    let fmt_opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    out.push_str(&format!(
        "AUC {}  PR-AUC {}  Acc {:.4}  P {:.4}  R {:.4}  F1 {:.4}\n",
        fmt_opt(report.auc),
        fmt_opt(report.pr_auc),
        report.accuracy,
        report.precision,
        report.recall,
        report.f1
    ));
    if report.mean_iou.is_some() || report.r_at_25.is_some() {
        out.push_str(&format!(
            "meanIoU {}  R@25 {}\n",
            fmt_opt(report.mean_iou),
            fmt_opt(report.r_at_25)
        ));
    }
    if !report.categories.is_empty() {
        out.push_str(&format!(
            "{:<16} {:>6} {:>5} {:>5} {:>7} {:>7}\n",
            "Category", "Total", "TP", "FN", "Acc.", "Recall"
        ));
        for row in &report.categories {
            out.push_str(&format!(
                "{:<16} {:>6} {:>5} {:>5} {:>7.3} {:>7.3}\n",
                row.category, row.total, row.tp, row.fn_, row.accuracy, row.recall
            ));
        }
    }
    if let Some(n) = &report.normal_row {
        out.push_str(&format!(
            "{:<16} {:>6} {:>5} {:>5} {:>7.3} {:>7}\n",
            "Normal",
            n.total,
            format!("{}TN", n.tn),
            format!("{}FP", n.fp),
            n.accuracy,
            "-"
        ));
    }
    out
}
