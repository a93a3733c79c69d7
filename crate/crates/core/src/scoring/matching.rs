//! Greedy one-to-one matching of detections to ground truth.

use serde::Serialize;

use crate::dataset::{Annotation, Detection, DistressClass};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchedPair {
    pub gt_index: usize,
    pub det_index: usize,
    pub iou: f64,
}

/// Outcome of matching for one class. Indices refer to the input slices.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ClassMatches {
    /// Pairs in the order they were claimed.
    pub pairs: Vec<MatchedPair>,
    /// Unmatched detection indices, ascending.
    pub false_positives: Vec<usize>,
    /// Unmatched ground-truth indices, ascending.
    pub false_negatives: Vec<usize>,
}

impl ClassMatches {
    pub fn tp(&self) -> usize {
        self.pairs.len()
    }
    pub fn fp(&self) -> usize {
        self.false_positives.len()
    }
    pub fn fn_count(&self) -> usize {
        self.false_negatives.len()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MatchResult {
    pub per_class: [ClassMatches; DistressClass::COUNT],
}

impl MatchResult {
    pub fn class(&self, class: DistressClass) -> &ClassMatches {
        &self.per_class[class.ordinal()]
    }
}

/// Result of matching that ignores labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct AgnosticMatch {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_dets: Vec<usize>,
    pub unmatched_gts: Vec<usize>,
}

/// Detection indices by descending confidence; equal confidences keep input order.
pub(crate) fn confidence_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].confidence.total_cmp(&dets[a].confidence));
    order
}

pub(crate) fn greedy(
    gts: &[Annotation],
    dets: &[Detection],
    iou_threshold: f64,
    respect_labels: bool,
) -> AgnosticMatch {
    let mut gt_taken = vec![false; gts.len()];
    let mut det_taken = vec![false; dets.len()];
    let mut pairs = Vec::new();

    for det_index in confidence_order(dets) {
        let det = &dets[det_index];
        let mut best: Option<(usize, f64)> = None;
        for (gt_index, gt) in gts.iter().enumerate() {
            if gt_taken[gt_index] || (respect_labels && gt.label != det.label) {
                continue;
            }
            let iou = det.bbox.iou(&gt.bbox);
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((gt_index, iou));
            }
        }
        if let Some((gt_index, iou)) = best {
            // "exceeds" the threshold: equality is not a match
            if iou > iou_threshold {
                gt_taken[gt_index] = true;
                det_taken[det_index] = true;
                pairs.push(MatchedPair {
                    gt_index,
                    det_index,
                    iou,
                });
            }
        }
    }

    AgnosticMatch {
        pairs,
        unmatched_dets: (0..dets.len()).filter(|&i| !det_taken[i]).collect(),
        unmatched_gts: (0..gts.len()).filter(|&i| !gt_taken[i]).collect(),
    }
}

/// Matches detections to ground truth for one image.
///
/// Detections are visited by descending confidence (ties in input order). Each
/// claims the unmatched ground truth of the same label with the highest IoU
/// (ties to the lower index), and the claim stands only when that IoU is
/// strictly greater than `iou_threshold`.
pub fn match_detections(gts: &[Annotation], dets: &[Detection], iou_threshold: f64) -> MatchResult {
    let m = greedy(gts, dets, iou_threshold, true);
    let mut result = MatchResult::default();
    for p in m.pairs {
        result.per_class[gts[p.gt_index].label.ordinal()]
            .pairs
            .push(p);
    }
    for d in m.unmatched_dets {
        result.per_class[dets[d].label.ordinal()]
            .false_positives
            .push(d);
    }
    for g in m.unmatched_gts {
        result.per_class[gts[g].label.ordinal()]
            .false_negatives
            .push(g);
    }
    result
}
