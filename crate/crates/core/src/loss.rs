//! Loss functions over externally supplied logits.
//!
//! Three objectives: binary cross-entropy for the anomaly classifier, masked
//! autoregressive cross-entropy over assistant response tokens, and the
//! text-coordinate GIoU loss that back-propagates box geometry through the
//! softmax over digit tokens. The module never produces logits; it consumes
//! them and returns values plus (for GIoU) analytic gradients.

use crate::geometry::{self, BinBox};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("batch fields have mismatched lengths")]
    MismatchedLengths,
    #[error("batch must contain at least one element")]
    EmptyBatch,
    #[error("target token {target} out of vocabulary range {vocab} at position {pos}")]
    TargetOutOfVocab {
        pos: usize,
        target: usize,
        vocab: usize,
    },
    #[error("coordinate must have 1..=4 digit positions, got {0}")]
    BadDigitSpan(usize),
    #[error("ground-truth box is invalid: {0}")]
    InvalidTarget(String),
    #[error("label {label} at position {pos} is not binary")]
    NonBinaryLabel { pos: usize, label: u8 },
}

/// Classifier logits with binary labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitBatch {
    pub logits: Vec<f64>,
    pub labels: Vec<u8>,
}

impl LogitBatch {
    pub fn new(logits: Vec<f64>, labels: Vec<u8>) -> Result<Self, LossError> {
        if logits.len() != labels.len() {
            return Err(LossError::MismatchedLengths);
        }
        if logits.is_empty() {
            return Err(LossError::EmptyBatch);
        }
        if let Some((pos, &label)) = labels.iter().enumerate().find(|(_, l)| **l > 1) {
            return Err(LossError::NonBinaryLabel { pos, label });
        }
        Ok(Self { logits, labels })
    }
}

/// Mean binary cross-entropy, computed in the numerically stable form
/// `max(l, 0) - l*y + ln(1 + exp(-|l|))`. Safe for |logit| up to 1e4 and
/// beyond.
pub fn bce(batch: &LogitBatch) -> f64 {
    let n = batch.logits.len() as f64;
    let sum: f64 = batch
        .logits
        .iter()
        .zip(&batch.labels)
        .map(|(&l, &y)| l.max(0.0) - l * y as f64 + (-l.abs()).exp().ln_1p())
        .sum();
    sum / n
}

/// Per-position vocabulary logits with target token ids and the assistant
/// mask selecting which positions contribute to the loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenBatch {
    pub logits: Vec<Vec<f64>>,
    pub targets: Vec<usize>,
    pub mask: Vec<bool>,
}

impl TokenBatch {
    pub fn new(
        logits: Vec<Vec<f64>>,
        targets: Vec<usize>,
        mask: Vec<bool>,
    ) -> Result<Self, LossError> {
        if logits.len() != targets.len() || logits.len() != mask.len() {
            return Err(LossError::MismatchedLengths);
        }
        for (pos, (row, &t)) in logits.iter().zip(&targets).enumerate() {
            if t >= row.len() {
                return Err(LossError::TargetOutOfVocab {
                    pos,
                    target: t,
                    vocab: row.len(),
                });
            }
        }
        Ok(Self {
            logits,
            targets,
            mask,
        })
    }

    pub fn masked_positions(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

fn log_softmax_at(logits: &[f64], index: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits[index] - lse
}

/// Summed cross-entropy over the masked (assistant) positions. Positions
/// outside the mask contribute exactly zero; an empty mask yields 0 with a
/// warning.
pub fn masked_lm_ce(batch: &TokenBatch) -> f64 {
    if batch.masked_positions() == 0 {
        log::warn!("masked_lm_ce: empty assistant mask, loss is 0");
        return 0.0;
    }
    batch
        .logits
        .iter()
        .zip(&batch.targets)
        .zip(&batch.mask)
        .filter(|(_, &m)| m)
        .map(|((row, &t), _)| -log_softmax_at(row, t))
        .sum()
}

/// Logits over the ten digit tokens for one position of a coordinate.
pub type DigitLogits = [f64; 10];

fn softmax10(logits: &DigitLogits) -> [f64; 10] {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; 10];
    let mut sum = 0.0;
    for (o, l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        sum += *o;
    }
    for o in &mut out {
        *o /= sum;
    }
    out
}

/// Differentiable coordinate decode: per position the expected digit under
/// the softmax, positions combined by place value and normalized by 1000,
/// clamped to [0, 1].
pub fn soft_coordinate(positions: &[DigitLogits]) -> Result<f64, LossError> {
    Ok(soft_coordinate_with_grad(positions)?.0)
}

/// Soft decode plus the gradient of the (pre-clamp-active) coordinate w.r.t.
/// every digit logit. When the clamp binds, the gradient is zero.
fn soft_coordinate_with_grad(
    positions: &[DigitLogits],
) -> Result<(f64, Vec<DigitLogits>), LossError> {
    let n = positions.len();
    if !(1..=4).contains(&n) {
        return Err(LossError::BadDigitSpan(n));
    }
    let mut raw = 0.0;
    let mut grads = vec![[0.0; 10]; n];
    for (k, logits) in positions.iter().enumerate() {
        let p = softmax10(logits);
        let soft_digit: f64 = p.iter().enumerate().map(|(d, &pd)| pd * d as f64).sum();
        let place = 10f64.powi((n - 1 - k) as i32) / 1000.0;
        raw += place * soft_digit;
        for d in 0..10 {
            grads[k][d] = place * p[d] * (d as f64 - soft_digit);
        }
    }
    // raw is always > 0 (softmax mass never sits fully on digit 0); the upper
    // clamp can only bind for four-digit spans.
    if raw > 1.0 {
        return Ok((1.0, vec![[0.0; 10]; n]));
    }
    Ok((raw, grads))
}

/// Hard decode: argmax digit per position (ties to the lower digit), place
/// values combined and clamped to [0, 1].
pub fn hard_coordinate(positions: &[DigitLogits]) -> Result<f64, LossError> {
    let n = positions.len();
    if !(1..=4).contains(&n) {
        return Err(LossError::BadDigitSpan(n));
    }
    let mut value = 0.0;
    for (k, logits) in positions.iter().enumerate() {
        let mut best = 0usize;
        for d in 1..10 {
            if logits[d] > logits[best] {
                best = d;
            }
        }
        value += 10f64.powi((n - 1 - k) as i32) * best as f64;
    }
    Ok((value / 1000.0).clamp(0.0, 1.0))
}

/// Digit-token logits for one predicted box: for each of the four
/// coordinates, an ordered list of digit positions (most significant first)
/// matching the teacher-forced target's digit span, plus the ground-truth
/// bins and the object label used for matching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DigitLogitBox {
    pub coords: [Vec<DigitLogits>; 4],
    pub target: BinBox,
    pub label: String,
}

impl DigitLogitBox {
    pub fn soft_box(&self) -> Result<[f64; 4], LossError> {
        let mut out = [0.0; 4];
        for (o, c) in out.iter_mut().zip(&self.coords) {
            *o = soft_coordinate(c)?;
        }
        Ok(out)
    }

    pub fn hard_box(&self) -> Result<[f64; 4], LossError> {
        let mut out = [0.0; 4];
        for (o, c) in out.iter_mut().zip(&self.coords) {
            *o = hard_coordinate(c)?;
        }
        Ok(out)
    }

    pub fn target_box(&self) -> Result<[f64; 4], LossError> {
        let b = geometry::from_bins(&self.target)
            .map_err(|e| LossError::InvalidTarget(e.to_string()))?;
        Ok([b.x1, b.y1, b.x2, b.y2])
    }
}

/// GIoU loss over a batch of digit-logit boxes, with the analytic gradient
/// w.r.t. every digit logit.
#[derive(Debug, Clone, PartialEq)]
pub struct GiouLossResult {
    pub value: f64,
    /// Gradient tensors mirroring the input shape.
    pub grads: Vec<[Vec<DigitLogits>; 4]>,
    /// Number of matched prediction/ground-truth pairs (M).
    pub matched: usize,
}

impl GiouLossResult {
    /// No label group produced a match; value and gradients are zero.
    pub fn is_flagged(&self) -> bool {
        self.matched == 0
    }
}

/// 1-D interval quantities and their derivatives w.r.t. (a1, a2).
/// Branch indicators follow the active min/max arm; ties take the `a` arm.
struct AxisTerms {
    overlap: f64,
    d_overlap: [f64; 2],
    width: f64,
    d_width: [f64; 2],
    enclose: f64,
    d_enclose: [f64; 2],
}

fn axis_terms(a1: f64, a2: f64, b1: f64, b2: f64) -> AxisTerms {
    let o_raw = a2.min(b2) - a1.max(b1);
    let overlap = o_raw.max(0.0);
    let d_overlap = [
        if o_raw > 0.0 && a1 >= b1 { -1.0 } else { 0.0 },
        if o_raw > 0.0 && a2 <= b2 { 1.0 } else { 0.0 },
    ];
    let w_raw = a2 - a1;
    let width = w_raw.max(0.0);
    let d_width = [
        if w_raw > 0.0 { -1.0 } else { 0.0 },
        if w_raw > 0.0 { 1.0 } else { 0.0 },
    ];
    let enclose = a2.max(b2) - a1.min(b1);
    let d_enclose = [
        if a1 <= b1 { -1.0 } else { 0.0 },
        if a2 >= b2 { 1.0 } else { 0.0 },
    ];
    AxisTerms {
        overlap,
        d_overlap,
        width,
        d_width,
        enclose,
        d_enclose,
    }
}

/// GIoU between a free-form predicted box `a` (coordinates may be unordered;
/// widths clamp at zero) and a valid ground-truth box `b`, plus the gradient
/// w.r.t. `a`'s four coordinates.
fn giou_with_grad(a: &[f64; 4], b: &[f64; 4]) -> (f64, [f64; 4]) {
    let x = axis_terms(a[0], a[2], b[0], b[2]);
    let y = axis_terms(a[1], a[3], b[1], b[3]);

    let inter = x.overlap * y.overlap;
    let area_a = x.width * y.width;
    let area_b = (b[2] - b[0]) * (b[3] - b[1]);
    let union = area_a + area_b - inter;
    let enclosing = x.enclose * y.enclose;

    // d/d[a_x1, a_y1, a_x2, a_y2]
    let d_inter = [
        x.d_overlap[0] * y.overlap,
        y.d_overlap[0] * x.overlap,
        x.d_overlap[1] * y.overlap,
        y.d_overlap[1] * x.overlap,
    ];
    let d_area = [
        x.d_width[0] * y.width,
        y.d_width[0] * x.width,
        x.d_width[1] * y.width,
        y.d_width[1] * x.width,
    ];
    let d_enc = [
        x.d_enclose[0] * y.enclose,
        y.d_enclose[0] * x.enclose,
        x.d_enclose[1] * y.enclose,
        y.d_enclose[1] * x.enclose,
    ];

    let mut value;
    let mut grad = [0.0; 4];
    if union > 0.0 {
        value = inter / union;
        for i in 0..4 {
            let d_union = d_area[i] - d_inter[i];
            grad[i] = (d_inter[i] * union - inter * d_union) / (union * union);
        }
    } else {
        value = 0.0;
    }
    if enclosing > 0.0 {
        value += union / enclosing - 1.0;
        for i in 0..4 {
            let d_union = d_area[i] - d_inter[i];
            grad[i] += (d_union * enclosing - union * d_enc[i]) / (enclosing * enclosing);
        }
    }
    (value, grad)
}

/// IoU between free-form boxes with clamped widths; used for the matching
/// cost on hard decodes.
fn iou_free(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let ox = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let oy = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = ox * oy;
    let area_a = (a[2] - a[0]).max(0.0) * (a[3] - a[1]).max(0.0);
    let area_b = (b[2] - b[0]).max(0.0) * (b[3] - b[1]).max(0.0);
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Text-coordinate GIoU loss: soft-decode every predicted box, pair
/// predictions with ground truth inside each label group (minimum-cost
/// one-to-one on `1 - IoU` of the hard decodes), then average `1 - GIoU`
/// over the matched pairs. Gradients flow through the GIoU geometry, the
/// place-value combination, and the softmax Jacobian.
///
/// An empty batch is not an error: it returns loss 0, zero gradients, and
/// `matched == 0` (flagged).
pub fn giou_loss(boxes: &[DigitLogitBox]) -> Result<GiouLossResult, LossError> {
    let mut grads: Vec<[Vec<DigitLogits>; 4]> = boxes
        .iter()
        .map(|b| {
            let mk = |c: &Vec<DigitLogits>| vec![[0.0; 10]; c.len()];
            [
                mk(&b.coords[0]),
                mk(&b.coords[1]),
                mk(&b.coords[2]),
                mk(&b.coords[3]),
            ]
        })
        .collect();

    if boxes.is_empty() {
        return Ok(GiouLossResult {
            value: 0.0,
            grads,
            matched: 0,
        });
    }

    // Soft decode with coordinate gradients, hard decode for matching costs.
    let mut soft: Vec<[f64; 4]> = Vec::with_capacity(boxes.len());
    let mut coord_grads: Vec<[Vec<DigitLogits>; 4]> = Vec::with_capacity(boxes.len());
    let mut hard: Vec<[f64; 4]> = Vec::with_capacity(boxes.len());
    let mut targets: Vec<[f64; 4]> = Vec::with_capacity(boxes.len());
    for b in boxes {
        let mut sb = [0.0; 4];
        let mut cg: [Vec<DigitLogits>; 4] = Default::default();
        for i in 0..4 {
            let (c, g) = soft_coordinate_with_grad(&b.coords[i])?;
            sb[i] = c;
            cg[i] = g;
        }
        soft.push(sb);
        coord_grads.push(cg);
        hard.push(b.hard_box()?);
        targets.push(b.target_box()?);
    }

    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, b) in boxes.iter().enumerate() {
        groups.entry(b.label.as_str()).or_default().push(i);
    }

    let mut pairs: Vec<(usize, usize)> = Vec::new(); // (pred box idx, gt box idx)
    for indices in groups.values() {
        let cost: Vec<Vec<f64>> = indices
            .iter()
            .map(|&pi| {
                indices
                    .iter()
                    .map(|&gi| 1.0 - iou_free(&hard[pi], &targets[gi]))
                    .collect()
            })
            .collect();
        for (r, c) in geometry::hungarian(&cost).expect("finite square cost matrix") {
            pairs.push((indices[r], indices[c]));
        }
    }

    let m = pairs.len();
    let mut value = 0.0;
    for (pi, gi) in pairs {
        let (g, dg) = giou_with_grad(&soft[pi], &targets[gi]);
        value += 1.0 - g;
        for coord in 0..4 {
            let scale = -dg[coord] / m as f64;
            for (k, row) in coord_grads[pi][coord].iter().enumerate() {
                for d in 0..10 {
                    grads[pi][coord][k][d] += scale * row[d];
                }
            }
        }
    }
    Ok(GiouLossResult {
        value: value / m as f64,
        grads,
        matched: m,
    })
}

/// Max relative error between the analytic [`giou_loss`] gradient and central
/// finite differences (step 1e-4), normalized by the gradient infinity norm.
/// The numeric side only ever evaluates loss values, so it stays an
/// independent check on the analytic path.
pub fn gradient_check(boxes: &[DigitLogitBox]) -> Result<f64, LossError> {
    const STEP: f64 = 1e-4;
    let analytic = giou_loss(boxes)?;
    let mut max_abs_diff = 0.0f64;
    let mut max_mag = 0.0f64;
    let mut work = boxes.to_vec();
    for bi in 0..boxes.len() {
        for c in 0..4 {
            for k in 0..boxes[bi].coords[c].len() {
                for d in 0..10 {
                    let orig = work[bi].coords[c][k][d];
                    work[bi].coords[c][k][d] = orig + STEP;
                    let up = giou_loss(&work)?.value;
                    work[bi].coords[c][k][d] = orig - STEP;
                    let down = giou_loss(&work)?.value;
                    work[bi].coords[c][k][d] = orig;
                    let fd = (up - down) / (2.0 * STEP);
                    let an = analytic.grads[bi][c][k][d];
                    max_abs_diff = max_abs_diff.max((an - fd).abs());
                    max_mag = max_mag.max(an.abs().max(fd.abs()));
                }
            }
        }
    }
    if max_mag == 0.0 {
        return Ok(max_abs_diff);
    }
    Ok(max_abs_diff / max_mag)
}

/// One random digit-logit configuration for the gradient suite: 1..=3 boxes
/// over a small label pool, random non-degenerate targets, logits in (-2, 2).
pub fn random_gradcheck_case(rng: &mut impl rand::Rng) -> Vec<DigitLogitBox> {
    const LABELS: [&str; 4] = ["man", "car", "person", "dog"];
    let n_boxes = rng.gen_range(1..=3);
    (0..n_boxes)
        .map(|_| {
            let x1 = rng.gen_range(0..700u32);
            let y1 = rng.gen_range(0..700u32);
            let x2 = rng.gen_range(x1 + 50..1000);
            let y2 = rng.gen_range(y1 + 50..1000);
            let coords: [Vec<DigitLogits>; 4] = std::array::from_fn(|_| {
                let n = rng.gen_range(1..=3);
                (0..n)
                    .map(|_| std::array::from_fn(|_| rng.gen_range(-2.0..2.0)))
                    .collect()
            });
            DigitLogitBox {
                coords,
                target: BinBox::new(x1, y1, x2, y2).expect("bins in range"),
                label: LABELS[rng.gen_range(0..LABELS.len())].into(),
            }
        })
        .collect()
}

/// Run `configs` random gradient checks and return the worst relative error.
pub fn gradient_suite(seed: u64, configs: usize) -> Result<f64, LossError> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..configs {
        let case = random_gradcheck_case(&mut rng);
        worst = worst.max(gradient_check(&case)?);
    }
    Ok(worst)
}
