//! Draft annotations from detector output and measure how much humans changed them.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Annotation, Dataset, Detection, ImageRecord, Predictions};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::postprocess::{confidence_filter, nms, DEFAULT_NMS_IOU};
use crate::scoring::greedy;

/// Turns predictions into draft annotations: per-image NMS at 0.45, then a
/// confidence cut. Boxes are clipped to the image.
///
/// `sizes` gives image dimensions; images missing from it get the smallest
/// integer extent covering their detections.
pub fn draft_labels(
    predictions: &Predictions,
    conf_threshold: f64,
    sizes: Option<&BTreeMap<String, (u32, u32)>>,
) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&conf_threshold) {
        return Err(Error::validation(format!(
            "confidence threshold {conf_threshold} outside [0, 1]"
        )));
    }
    let records = predictions
        .par_iter()
        .map(|(id, dets)| {
            let kept = confidence_filter(&nms(dets, DEFAULT_NMS_IOU)?, conf_threshold)?;
            let (w, h) = match sizes.and_then(|s| s.get(id)) {
                Some(&wh) => wh,
                None => {
                    let extent = |f: fn(&BBox) -> f64| {
                        kept.iter()
                            .map(|d| f(&d.bbox))
                            .fold(1.0f64, f64::max)
                            .ceil() as u32
                    };
                    (extent(BBox::x_max), extent(BBox::y_max))
                }
            };
            let frame = BBox::new(0.0, 0.0, w as f64, h as f64)?;
            let anns = kept
                .iter()
                .filter_map(|d| {
                    d.bbox
                        .intersect(&frame)
                        .map(|b| Annotation::new(b, d.label))
                })
                .collect();
            ImageRecord::new(id.clone(), w, h, anns)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffConfig {
    /// Minimum IoU (exclusive) for a draft box to count as the same object.
    pub match_iou: f64,
    /// Above this IoU an unchanged-label box counts as kept rather than resized.
    pub keep_iou: f64,
}

impl Default for DiffConfig {
    fn default() -> Self {
        Self {
            match_iou: 0.5,
            keep_iou: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionStats {
    pub kept: u64,
    pub relabeled: u64,
    pub resized: u64,
    pub added: u64,
    pub deleted: u64,
}

impl CorrectionStats {
    fn add(&mut self, o: &CorrectionStats) {
        self.kept += o.kept;
        self.relabeled += o.relabeled;
        self.resized += o.resized;
        self.added += o.added;
        self.deleted += o.deleted;
    }

    pub fn draft_total(&self) -> u64 {
        self.kept + self.relabeled + self.resized + self.deleted
    }

    pub fn corrected_total(&self) -> u64 {
        self.kept + self.relabeled + self.resized + self.added
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        for (name, v) in [
            ("kept", self.kept),
            ("relabeled", self.relabeled),
            ("resized", self.resized),
            ("added", self.added),
            ("deleted", self.deleted),
        ] {
            let _ = writeln!(s, "{name:<10} {v:>8}");
        }
        s
    }
}

fn diff_image(draft: &[Annotation], corrected: &[Annotation], cfg: &DiffConfig) -> CorrectionStats {
    // draft boxes all carry confidence 1, so they are visited in input order
    let dets: Vec<Detection> = draft.iter().copied().map(Detection::from).collect();
    let m = greedy(corrected, &dets, cfg.match_iou, false);
    let mut s = CorrectionStats {
        added: m.unmatched_gts.len() as u64,
        deleted: m.unmatched_dets.len() as u64,
        ..Default::default()
    };
    for p in m.pairs {
        if draft[p.det_index].label != corrected[p.gt_index].label {
            s.relabeled += 1;
        } else if p.iou > cfg.keep_iou {
            s.kept += 1;
        } else {
            s.resized += 1;
        }
    }
    s
}

/// Classifies every box of a draft/corrected pair of datasets. Matching is
/// label-agnostic and greedy per image.
pub fn diff_annotations(
    draft: &Dataset,
    corrected: &Dataset,
    cfg: &DiffConfig,
) -> Result<CorrectionStats> {
    if !(cfg.match_iou > 0.0
        && cfg.match_iou < 1.0
        && cfg.keep_iou >= cfg.match_iou
        && cfg.keep_iou < 1.0)
    {
        return Err(Error::validation(format!(
            "need 0 < match_iou <= keep_iou < 1, got {} and {}",
            cfg.match_iou, cfg.keep_iou
        )));
    }
    let mut mismatched: Vec<String> = draft
        .ids()
        .filter(|id| !corrected.contains(id))
        .chain(corrected.ids().filter(|id| !draft.contains(id)))
        .map(str::to_string)
        .collect();
    if !mismatched.is_empty() {
        mismatched.sort();
        return Err(Error::validation(format!(
            "draft and corrected cover different images: {}",
            mismatched.join(", ")
        )));
    }
    let per_image: Vec<CorrectionStats> = draft
        .records()
        .par_iter()
        .map(|d| {
            let c = corrected.get(&d.image_id).expect("id sets checked above");
            diff_image(&d.annotations, &c.annotations, cfg)
        })
        .collect();
    let mut total = CorrectionStats::default();
    for s in &per_image {
        total.add(s);
    }
    Ok(total)
}
