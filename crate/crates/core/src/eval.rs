//! IoU-based one-to-one detection matching with micro-averaged
//! precision, recall and hmean.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::QuadBox;

/// Intersection over union of the boxes' axis-aligned bounding rectangles.
/// Zero-area boxes score 0.
pub fn iou(a: &QuadBox, b: &QuadBox) -> f64 {
    let (ra, rb) = (a.bounding_rect(), b.bounding_rect());
    let inter = ra.intersection_area(&rb);
    let union = ra.area() + rb.area() - inter;
    if union <= 0.0 || ra.area() <= 0.0 || rb.area() <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchParams {
    pub iou_threshold: f64,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self { iou_threshold: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub hmean: f64,
    pub matched: usize,
    pub num_detections: usize,
    pub num_ground_truth: usize,
}

impl EvalReport {
    /// Builds the report from corpus totals. With no detections and no ground
    /// truth everything is 1; a ratio with an empty denominator is 1 when the
    /// other side is empty as well and 0 otherwise.
    pub fn from_counts(matched: usize, num_detections: usize, num_ground_truth: usize) -> Self {
        let ratio = |den: usize, other: usize| {
            if den > 0 {
                matched as f64 / den as f64
            } else if other == 0 {
                1.0
            } else {
                0.0
            }
        };
        let precision = ratio(num_detections, num_ground_truth);
        let recall = ratio(num_ground_truth, num_detections);
        let hmean = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            hmean,
            matched,
            num_detections,
            num_ground_truth,
        }
    }
}

/// Greedy one-to-one matching for one image: candidate pairs are taken in
/// order of (IoU descending, detection index, ground-truth index) and
/// accepted while both boxes are free and the IoU reaches the threshold.
/// Returns the matched `(detection, ground_truth)` index pairs.
pub fn match_image(detections: &[QuadBox], ground_truth: &[QuadBox], p: &MatchParams) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (d, det) in detections.iter().enumerate() {
        for (g, gt) in ground_truth.iter().enumerate() {
            let v = iou(det, gt);
            if v >= p.iou_threshold {
                pairs.push((v, d, g));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut det_used = alloc::vec![false; detections.len()];
    let mut gt_used = alloc::vec![false; ground_truth.len()];
    let mut out = Vec::new();
    for (_, d, g) in pairs {
        if !det_used[d] && !gt_used[g] {
            det_used[d] = true;
            gt_used[g] = true;
            out.push((d, g));
        }
    }
    out
}

/// Scores per-image detections against per-image ground truth, both indexed
/// by the same image order.
pub fn evaluate(detections: &[Vec<QuadBox>], ground_truth: &[Vec<QuadBox>], p: &MatchParams) -> Result<EvalReport> {
    if detections.len() != ground_truth.len() {
        return Err(Error::invalid("detections and ground truth cover different image counts"));
    }
    if !(p.iou_threshold > 0.0 && p.iou_threshold <= 1.0) {
        return Err(Error::invalid("iou_threshold must lie in (0, 1]"));
    }
    let (mut matched, mut ndet, mut ngt) = (0, 0, 0);
    for (det, gt) in detections.iter().zip(ground_truth) {
        matched += match_image(det, gt, p).len();
        ndet += det.len();
        ngt += gt.len();
    }
    if ndet == 0 && ngt == 0 {
        log::info!("empty corpus: precision, recall and hmean reported as 1");
    }
    Ok(EvalReport::from_counts(matched, ndet, ngt))
}
