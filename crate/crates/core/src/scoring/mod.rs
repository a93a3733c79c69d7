//! Per-class precision, recall and F1 over IoU-matched detections, plus
//! label-confusion matrices for comparing annotation sets.

mod confusion;
mod matching;

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{Dataset, DistressClass, Predictions};
use crate::error::{Error, Result};

pub use confusion::{annotation_confusion, AnnotationAgreement, ConfusionMatrix};
pub(crate) use matching::{confidence_order, greedy};
pub use matching::{match_detections, ClassMatches, MatchResult, MatchedPair};

/// IoU a detection must exceed to count as a hit.
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

/// `tp / (tp + fp)`, or 0 when nothing was predicted.
pub fn precision(tp: u64, fp: u64) -> f64 {
    let denom = tp + fp;
    if denom == 0 {
        0.0
    } else {
        tp as f64 / denom as f64
    }
}

/// `tp / (tp + fn)`, or 0 when there is no ground truth.
pub fn recall(tp: u64, fn_count: u64) -> f64 {
    let denom = tp + fn_count;
    if denom == 0 {
        0.0
    } else {
        tp as f64 / denom as f64
    }
}

/// Harmonic mean of precision and recall, or 0 when both are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    let denom = precision + recall;
    if denom == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / denom
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_count: u64,
}

impl Counts {
    fn add(&mut self, other: Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_count += other.fn_count;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub class: DistressClass,
    #[serde(flatten)]
    pub counts: Counts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Whether the class appears in ground truth or predictions and so
    /// contributes to the mean.
    pub evaluated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub iou_threshold: f64,
    pub per_class: Vec<ClassReport>,
    pub classes_evaluated: Vec<DistressClass>,
    pub mean_f1: f64,
    pub confusion: ConfusionMatrix,
}

impl EvalReport {
    pub fn class(&self, class: DistressClass) -> &ClassReport {
        &self.per_class[class.ordinal()]
    }

    /// F1 for each evaluated class, keyed by class name.
    pub fn per_class_f1(&self) -> std::collections::BTreeMap<String, f64> {
        self.per_class
            .iter()
            .filter(|c| c.evaluated)
            .map(|c| (c.class.name().to_string(), c.f1))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned plain-text rendering: one row per class, then the mean.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<13} {:>6} {:>6} {:>6} {:>10} {:>10} {:>10}",
            "class", "tp", "fp", "fn", "precision", "recall", "f1"
        );
        for c in &self.per_class {
            let mark = if c.evaluated { "" } else { " (n/a)" };
            let _ = writeln!(
                s,
                "{:<13} {:>6} {:>6} {:>6} {:>10.6} {:>10.6} {:>10.6}{mark}",
                c.class.name(),
                c.counts.tp,
                c.counts.fp,
                c.counts.fn_count,
                c.precision,
                c.recall,
                c.f1
            );
        }
        let _ = writeln!(s, "mean_f1 {:.6}", self.mean_f1);
        s
    }
}

/// Scores `predictions` against `gt`.
///
/// Counts are pooled over all images per class before computing F1. The mean
/// runs over classes present in either ground truth or predictions; when no
/// class is present at all the mean is 0.
pub fn evaluate(gt: &Dataset, predictions: &Predictions, iou_threshold: f64) -> Result<EvalReport> {
    if !(iou_threshold > 0.0 && iou_threshold < 1.0) {
        return Err(Error::validation(format!(
            "IoU threshold {iou_threshold} must lie in (0, 1)"
        )));
    }
    let mut unknown: Vec<String> = predictions
        .keys()
        .filter(|id| !gt.contains(id))
        .cloned()
        .collect();
    if !unknown.is_empty() {
        unknown.sort();
        return Err(Error::UnknownImages(unknown));
    }

    let empty = Vec::new();
    let (counts, confusion) = gt
        .records()
        .par_iter()
        .map(|record| {
            let dets = predictions.get(&record.image_id).unwrap_or(&empty);
            let m = match_detections(&record.annotations, dets, iou_threshold);
            let mut counts = [Counts::default(); DistressClass::COUNT];
            for (c, cm) in counts.iter_mut().zip(&m.per_class) {
                *c = Counts {
                    tp: cm.tp() as u64,
                    fp: cm.fp() as u64,
                    fn_count: cm.fn_count() as u64,
                };
            }
            let confusion = ConfusionMatrix::from_pairs(&record.annotations, dets, iou_threshold);
            (counts, confusion)
        })
        .reduce(
            || {
                (
                    [Counts::default(); DistressClass::COUNT],
                    ConfusionMatrix::default(),
                )
            },
            |(mut ca, mut ma), (cb, mb)| {
                for (a, b) in ca.iter_mut().zip(cb) {
                    a.add(b);
                }
                ma.add(&mb);
                (ca, ma)
            },
        );

    let per_class: Vec<ClassReport> = DistressClass::ALL
        .iter()
        .zip(counts)
        .map(|(&class, counts)| {
            let p = precision(counts.tp, counts.fp);
            let r = recall(counts.tp, counts.fn_count);
            ClassReport {
                class,
                counts,
                precision: p,
                recall: r,
                f1: f1(p, r),
                evaluated: counts.tp + counts.fp + counts.fn_count > 0,
            }
        })
        .collect();
    let classes_evaluated: Vec<DistressClass> = per_class
        .iter()
        .filter(|c| c.evaluated)
        .map(|c| c.class)
        .collect();
    let mean_f1 = if classes_evaluated.is_empty() {
        0.0
    } else {
        per_class
            .iter()
            .filter(|c| c.evaluated)
            .map(|c| c.f1)
            .sum::<f64>()
            / classes_evaluated.len() as f64
    };

    Ok(EvalReport {
        iou_threshold,
        per_class,
        classes_evaluated,
        mean_f1,
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Annotation, Detection, ImageRecord};
    use crate::geometry::BBox;
    use proptest::prelude::*;
    use DistressClass::*;

    fn ann(b: [f64; 4], l: DistressClass) -> Annotation {
        Annotation::new(BBox::new(b[0], b[1], b[2], b[3]).unwrap(), l)
    }
    fn det(b: [f64; 4], l: DistressClass, c: f64) -> Detection {
        Detection::new(BBox::new(b[0], b[1], b[2], b[3]).unwrap(), l, c).unwrap()
    }

    #[test]
    fn metric_examples() {
        let p = precision(3, 1);
        let r = recall(3, 2);
        assert_eq!(p, 0.75);
        assert_eq!(r, 0.6);
        assert!((f1(p, r) - 0.9 / 1.35).abs() < 1e-12);
        assert!((f1(p, r) - 0.666667).abs() < 1e-6);
        assert_eq!(f1(1.0, 1.0), 1.0);
        assert_eq!(precision(0, 0), 0.0);
        assert_eq!(recall(0, 0), 0.0);
        assert_eq!(f1(0.0, 0.0), 0.0);
    }

    fn two_image_gt() -> Dataset {
        Dataset::new(vec![
            ImageRecord::new(
                "a",
                100,
                100,
                vec![
                    ann([0.0, 0.0, 10.0, 10.0], Longitudinal),
                    ann([50.0, 50.0, 60.0, 60.0], Transverse),
                ],
            )
            .unwrap(),
            ImageRecord::new(
                "b",
                100,
                100,
                vec![ann([0.0, 0.0, 10.0, 10.0], Longitudinal)],
            )
            .unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn mixed_hits_and_misses() {
        let gt = two_image_gt();
        let mut preds = Predictions::new();
        // IoU 0.7 and 0.8 against the two Longitudinal boxes
        preds.insert(
            "a".into(),
            vec![det([0.0, 0.0, 10.0, 7.0], Longitudinal, 0.9)],
        );
        preds.insert(
            "b".into(),
            vec![det([0.0, 0.0, 10.0, 8.0], Longitudinal, 0.8)],
        );
        let r = evaluate(&gt, &preds, 0.5).unwrap();
        assert_eq!(r.class(Longitudinal).f1, 1.0);
        assert_eq!(r.class(Transverse).f1, 0.0);
        assert_eq!(r.classes_evaluated, vec![Transverse, Longitudinal]);
        assert_eq!(r.mean_f1, 0.5);
        assert_eq!(r.confusion.get(Some(Transverse), None), 1);
        assert_eq!(r.confusion.get(Some(Longitudinal), Some(Longitudinal)), 2);
    }

    #[test]
    fn perfect_and_empty() {
        let gt = two_image_gt();
        let r = evaluate(&gt, &gt.as_predictions(), 0.5).unwrap();
        assert!(r
            .per_class
            .iter()
            .filter(|c| c.evaluated)
            .all(|c| c.f1 == 1.0));
        assert_eq!(r.mean_f1, 1.0);
        let r = evaluate(&gt, &Predictions::new(), 0.5).unwrap();
        assert_eq!(r.mean_f1, 0.0);
    }

    #[test]
    fn unknown_ids_are_listed() {
        let gt = two_image_gt();
        let mut preds = Predictions::new();
        preds.insert("zz".into(), vec![]);
        preds.insert("c".into(), vec![]);
        match evaluate(&gt, &preds, 0.5) {
            Err(Error::UnknownImages(ids)) => assert_eq!(ids, ["c", "zz"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn table_and_json_render() {
        let gt = two_image_gt();
        let r = evaluate(&gt, &gt.as_predictions(), 0.5).unwrap();
        assert!(r.to_table().contains("mean_f1 1.000000"));
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["mean_f1"], 1.0);
        assert_eq!(v["per_class"][5]["tp"], 2);
        assert_eq!(v["confusion"]["matrix"].as_array().unwrap().len(), 8);
    }

    fn scene() -> impl Strategy<Value = (Vec<Annotation>, Vec<Detection>)> {
        let b = (0u32..40, 0u32..40, 1u32..20, 1u32..20, 0usize..3);
        (
            proptest::collection::vec(b.clone(), 0..6),
            proptest::collection::vec((b, 0.0..1.0f64), 0..6),
        )
            .prop_map(|(gs, ds)| {
                let gts = gs
                    .into_iter()
                    .map(|(x, y, w, h, c)| {
                        ann(
                            [x as f64, y as f64, (x + w) as f64, (y + h) as f64],
                            DistressClass::ALL[c],
                        )
                    })
                    .collect();
                let dets = ds
                    .into_iter()
                    .map(|((x, y, w, h, c), conf)| {
                        det(
                            [x as f64, y as f64, (x + w) as f64, (y + h) as f64],
                            DistressClass::ALL[c],
                            conf,
                        )
                    })
                    .collect();
                (gts, dets)
            })
    }

    proptest! {
        #[test]
        fn f1_bounds(tp in 0u64..50, fp in 0u64..50, fn_count in 0u64..50) {
            let p = precision(tp, fp);
            let r = recall(tp, fn_count);
            let f = f1(p, r);
            prop_assert!(f <= 2.0 * p + 1e-15 && f <= 2.0 * r + 1e-15);
            prop_assert!(f <= p.max(r) + 1e-15);
        }

        #[test]
        fn conservation_and_scale_invariance((gts, dets) in scene(), k in 1u32..5) {
            let rec = ImageRecord::new("s", 100, 100, gts.clone()).unwrap();
            let gt = Dataset::new(vec![rec]).unwrap();
            let mut preds = Predictions::new();
            preds.insert("s".into(), dets.clone());
            let r = evaluate(&gt, &preds, 0.5).unwrap();
            for c in &r.per_class {
                let g = gts.iter().filter(|a| a.label == c.class).count() as u64;
                let d = dets.iter().filter(|a| a.label == c.class).count() as u64;
                prop_assert_eq!(c.counts.tp + c.counts.fn_count, g);
                prop_assert_eq!(c.counts.tp + c.counts.fp, d);
            }

            // power-of-two scale keeps every coordinate exact
            let s = (1u32 << k) as f64;
            let scale = |b: &BBox| BBox::new(b.x_min() * s, b.y_min() * s, b.x_max() * s, b.y_max() * s).unwrap();
            let sgts: Vec<_> = gts.iter().map(|a| Annotation::new(scale(&a.bbox), a.label)).collect();
            let sdets: Vec<_> = dets.iter().map(|d| Detection { bbox: scale(&d.bbox), ..*d }).collect();
            let srec = ImageRecord::new("s", 100 << k, 100 << k, sgts).unwrap();
            let mut spreds = Predictions::new();
            spreds.insert("s".into(), sdets);
            let sr = evaluate(&Dataset::new(vec![srec]).unwrap(), &spreds, 0.5).unwrap();
            prop_assert_eq!(sr, r);
        }
    }
}
