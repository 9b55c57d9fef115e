//! Box geometry and matching primitives.
//!
//! All boxes are axis-aligned rectangles in canonical normalized coordinates:
//! unitless fractions of frame width/height in `[0, 1]`, `(0, 0)` top-left.
//! Prompt-facing coordinates use integer bins in `[0, 1000]` ([`BinBox`]).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of coordinate bins per axis on the prompt side.
pub const BIN_SCALE: u32 = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("box coordinates out of order or outside [0,1]: [{0}, {1}, {2}, {3}]")]
    InvalidBox(f64, f64, f64, f64),
    #[error("coordinate bin {0} outside [0, {BIN_SCALE}]")]
    BinOutOfRange(u32),
    #[error("detection confidence {0} outside [0,1]")]
    InvalidConfidence(f64),
    #[error("detection label must be non-empty lowercase text, got {0:?}")]
    InvalidLabel(String),
    #[error("cost matrix rows have unequal lengths")]
    RaggedMatrix,
    #[error("cost matrix contains a non-finite entry")]
    NonFiniteCost,
}

/// Axis-aligned box in normalized `[0,1]` coordinates with `x1 <= x2`,
/// `y1 <= y2`. Zero-area boxes are valid inputs everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, GeometryError> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(in_unit(x1) && in_unit(y1) && in_unit(x2) && in_unit(y2) && x1 <= x2 && y1 <= y2) {
            return Err(GeometryError::InvalidBox(x1, y1, x2, y2));
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn area(&self) -> f64 {
        (self.x2 - self.x1) * (self.y2 - self.y1)
    }

    pub fn is_valid(&self) -> bool {
        BBox::new(self.x1, self.y1, self.x2, self.y2).is_ok()
    }
}

/// Box with coordinates binned to integers in `[0, 1000]`, the rendering used
/// in prompts and model responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinBox {
    pub x1: u32,
    pub y1: u32,
    pub x2: u32,
    pub y2: u32,
}

impl BinBox {
    pub fn new(x1: u32, y1: u32, x2: u32, y2: u32) -> Result<Self, GeometryError> {
        for v in [x1, y1, x2, y2] {
            if v > BIN_SCALE {
                return Err(GeometryError::BinOutOfRange(v));
            }
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn as_array(&self) -> [u32; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }
}

/// One detector output: lowercase label, normalized box, confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub label: String,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub confidence: f64,
}

impl Detection {
    pub fn new(
        label: impl Into<String>,
        bbox: BBox,
        confidence: f64,
    ) -> Result<Self, GeometryError> {
        let label = label.into();
        if label.is_empty() || label != label.to_lowercase() {
            return Err(GeometryError::InvalidLabel(label));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(GeometryError::InvalidConfidence(confidence));
        }
        Ok(Self {
            label,
            bbox,
            confidence,
        })
    }
}

/// One-to-one assignment of query indices to detection indices.
///
/// Detection indices are unique; every query index appears exactly once,
/// either in `pairs` or in `unmatched`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    /// `(query index, detection index)` pairs.
    pub pairs: Vec<(usize, usize)>,
    /// Query indices left without a detection.
    pub unmatched: Vec<usize>,
}

impl Assignment {
    pub fn detection_for(&self, query: usize) -> Option<usize> {
        self.pairs
            .iter()
            .find(|(q, _)| *q == query)
            .map(|(_, d)| *d)
    }
}

/// Intersection-over-union. Degenerate boxes are allowed; any pairing with a
/// zero-area union scores 0.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    inter / union
}

/// Generalized IoU: IoU minus the normalized excess area of the smallest
/// enclosing box. Provides signal even for disjoint boxes; range `(-1, 1]`.
pub fn giou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    let cw = a.x2.max(b.x2) - a.x1.min(b.x1);
    let ch = a.y2.max(b.y2) - a.y1.min(b.y1);
    let enclosing = cw * ch;
    let iou = if union <= 0.0 { 0.0 } else { inter / union };
    if enclosing <= 0.0 {
        // Both boxes degenerate to the same point/segment.
        return iou;
    }
    iou - (enclosing - union) / enclosing
}

/// Fraction of the frame the box covers.
pub fn area_fraction(b: &BBox) -> f64 {
    b.area()
}

/// Scale a normalized box to integer bins, rounding half away from zero.
pub fn to_bins(b: &BBox) -> BinBox {
    let scale = |v: f64| (v * BIN_SCALE as f64).round() as u32;
    BinBox {
        x1: scale(b.x1),
        y1: scale(b.y1),
        x2: scale(b.x2),
        y2: scale(b.y2),
    }
}

/// Inverse of [`to_bins`]. Errors if a bin is out of range or the bins do not
/// form an ordered box.
pub fn from_bins(bb: &BinBox) -> Result<BBox, GeometryError> {
    for v in bb.as_array() {
        if v > BIN_SCALE {
            return Err(GeometryError::BinOutOfRange(v));
        }
    }
    let f = |v: u32| v as f64 / BIN_SCALE as f64;
    BBox::new(f(bb.x1), f(bb.y1), f(bb.x2), f(bb.y2))
}

/// Bidirectional substring match between two labels, case-insensitive and
/// whitespace-trimmed. `("man", "man in white shirt")` matches.
pub fn label_match(a: &str, b: &str) -> bool {
    let a = a.trim().to_lowercase();
    let b = b.trim().to_lowercase();
    a.contains(&b) || b.contains(&a)
}

/// Confidence-ordered greedy deduplication.
///
/// Candidates are sorted by confidence descending (stable, so ties keep input
/// order) and assigned in order. A candidate is assigned iff its query id has
/// no box yet and its box has IoU <= `iou_skip` with every already-assigned
/// box. Returned detection indices point into `candidates`.
pub fn greedy_dedup(candidates: &[(usize, Detection)], iou_skip: f64) -> Assignment {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&i, &j| {
        candidates[j]
            .1
            .confidence
            .partial_cmp(&candidates[i].1.confidence)
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut taken_boxes: Vec<&BBox> = Vec::new();
    for idx in order {
        let (query, det) = &candidates[idx];
        if pairs.iter().any(|(q, _)| q == query) {
            continue;
        }
        if taken_boxes.iter().any(|b| iou(b, &det.bbox) > iou_skip) {
            continue;
        }
        pairs.push((*query, idx));
        taken_boxes.push(&candidates[idx].1.bbox);
    }
    pairs.sort_by_key(|(q, _)| *q);

    let mut unmatched: Vec<usize> = Vec::new();
    let mut queries: Vec<usize> = candidates.iter().map(|(q, _)| *q).collect();
    queries.sort_unstable();
    queries.dedup();
    for q in queries {
        if !pairs.iter().any(|(pq, _)| *pq == q) {
            unmatched.push(q);
        }
    }
    Assignment { pairs, unmatched }
}

/// A matched `(pred index, gt index, iou)` triple from [`greedy_best_match`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IouMatch {
    pub pred: usize,
    pub gt: usize,
    pub iou: f64,
}

/// Greedy global best-match between predicted and ground-truth boxes.
///
/// Repeatedly picks the unmatched pair with the highest IoU until no pair
/// with IoU > 0 remains; ties break toward the lower pred index, then the
/// lower gt index.
pub fn greedy_best_match(preds: &[BBox], gts: &[BBox]) -> Vec<IouMatch> {
    let mut pairs: Vec<IouMatch> = Vec::new();
    for (pi, p) in preds.iter().enumerate() {
        for (gi, g) in gts.iter().enumerate() {
            let v = iou(p, g);
            if v > 0.0 {
                pairs.push(IouMatch {
                    pred: pi,
                    gt: gi,
                    iou: v,
                });
            }
        }
    }
    // Descending IoU; ties by (pred, gt) ascending.
    pairs.sort_by(|a, b| {
        b.iou
            .partial_cmp(&a.iou)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.pred.cmp(&b.pred))
            .then(a.gt.cmp(&b.gt))
    });

    let mut used_pred = vec![false; preds.len()];
    let mut used_gt = vec![false; gts.len()];
    let mut matches = Vec::new();
    for m in pairs {
        if used_pred[m.pred] || used_gt[m.gt] {
            continue;
        }
        used_pred[m.pred] = true;
        used_gt[m.gt] = true;
        matches.push(m);
    }
    matches
}

/// Minimum-cost one-to-one assignment (Kuhn-Munkres with potentials).
///
/// Returns `(row, col)` pairs covering `min(rows, cols)` rows; for square
/// matrices every row is matched. Empty matrices yield an empty assignment.
pub fn hungarian(cost: &[Vec<f64>]) -> Result<Vec<(usize, usize)>, GeometryError> {
    let n_rows = cost.len();
    if n_rows == 0 {
        return Ok(Vec::new());
    }
    let n_cols = cost[0].len();
    if cost.iter().any(|row| row.len() != n_cols) {
        return Err(GeometryError::RaggedMatrix);
    }
    if n_cols == 0 {
        return Ok(Vec::new());
    }
    if cost.iter().flatten().any(|v| !v.is_finite()) {
        return Err(GeometryError::NonFiniteCost);
    }

    // The augmenting-path formulation needs rows <= cols; transpose otherwise.
    if n_rows > n_cols {
        let transposed: Vec<Vec<f64>> = (0..n_cols)
            .map(|j| (0..n_rows).map(|i| cost[i][j]).collect())
            .collect();
        let mut pairs: Vec<(usize, usize)> = hungarian(&transposed)?
            .into_iter()
            .map(|(r, c)| (c, r))
            .collect();
        pairs.sort_unstable();
        return Ok(pairs);
    }

    // Shortest augmenting path with dual potentials, 1-indexed scratch arrays.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n_rows + 1];
    let mut v = vec![0.0; n_cols + 1];
    let mut col_row = vec![0usize; n_cols + 1]; // row matched to each col (1-indexed, 0 = free)

    for row in 1..=n_rows {
        let mut min_v = vec![inf; n_cols + 1];
        let mut visited = vec![false; n_cols + 1];
        let mut path = vec![0usize; n_cols + 1];
        let mut j0 = 0usize;
        col_row[0] = row;
        loop {
            visited[j0] = true;
            let i0 = col_row[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n_cols {
                if visited[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < min_v[j] {
                    min_v[j] = cur;
                    path[j] = j0;
                }
                if min_v[j] < delta {
                    delta = min_v[j];
                    j1 = j;
                }
            }
            for j in 0..=n_cols {
                if visited[j] {
                    u[col_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_v[j] -= delta;
                }
            }
            j0 = j1;
            if col_row[j0] == 0 {
                break;
            }
        }
        // Unwind the augmenting path.
        while j0 != 0 {
            let j1 = path[j0];
            col_row[j0] = col_row[j1];
            j0 = j1;
        }
    }

    let mut pairs: Vec<(usize, usize)> = (1..=n_cols)
        .filter(|&j| col_row[j] != 0)
        .map(|j| (col_row[j] - 1, j - 1))
        .collect();
    pairs.sort_unstable();
    Ok(pairs)
}
