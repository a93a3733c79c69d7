//! Confidence filtering, per-class NMS, inverse box mapping and TTA fusion.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{
    bbox_safe_crop, crop_protecting, hflip, invert, vflip, TransformKind, TransformRecord,
};
use crate::dataset::{Dataset, Detection, ImageRecord, Predictions};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::rng::substream;
use crate::scoring::confidence_order;

pub const DEFAULT_CONF_THRESHOLD: f64 = 0.25;
pub const DEFAULT_NMS_IOU: f64 = 0.45;

/// Fraction of each side kept by TTA crops of images that have no boxes.
pub const TTA_CROP_CORE: f64 = 0.8;

fn check_conf(conf_threshold: f64) -> Result<()> {
    if (0.0..=1.0).contains(&conf_threshold) {
        Ok(())
    } else {
        Err(Error::validation(format!(
            "confidence threshold {conf_threshold} outside [0, 1]"
        )))
    }
}

fn check_iou(iou_threshold: f64) -> Result<()> {
    if iou_threshold > 0.0 && iou_threshold < 1.0 {
        Ok(())
    } else {
        Err(Error::validation(format!(
            "IoU threshold {iou_threshold} outside (0, 1)"
        )))
    }
}

/// Keeps detections with confidence at or above the threshold, in order.
pub fn confidence_filter(dets: &[Detection], conf_threshold: f64) -> Result<Vec<Detection>> {
    check_conf(conf_threshold)?;
    Ok(dets
        .iter()
        .filter(|d| d.confidence >= conf_threshold)
        .copied()
        .collect())
}

/// Per-class greedy non-maximum suppression.
///
/// Detections are visited by descending confidence (ties in input order) and
/// kept when their IoU with every kept detection of the same class is below
/// `iou_threshold`. Output is in visiting order.
pub fn nms(dets: &[Detection], iou_threshold: f64) -> Result<Vec<Detection>> {
    check_iou(iou_threshold)?;
    let mut kept: Vec<Detection> = Vec::new();
    for i in confidence_order(dets) {
        let d = &dets[i];
        let clear = kept
            .iter()
            .filter(|k| k.label == d.label)
            .all(|k| k.bbox.iou(&d.bbox) < iou_threshold);
        if clear {
            kept.push(*d);
        }
    }
    Ok(kept)
}

/// Maps detections from a transformed frame back to the source frame of `record`.
pub fn inverse_map(dets: &[Detection], record: &TransformRecord) -> Result<Vec<Detection>> {
    inverse_map_chain(dets, std::slice::from_ref(record))
}

/// Maps detections back through a chain of transforms given in the order
/// they were applied. Results are clipped to the first source frame; boxes
/// that fall entirely outside it are dropped.
pub fn inverse_map_chain(dets: &[Detection], chain: &[TransformRecord]) -> Result<Vec<Detection>> {
    if let Some(r) = chain.iter().find(|r| !r.geometry_invertible()) {
        return Err(Error::NonInvertible(format!("{:?}", r.kind())));
    }
    let Some(first) = chain.first() else {
        return Ok(dets.to_vec());
    };
    let frame = BBox::new(
        0.0,
        0.0,
        first.source_width as f64,
        first.source_height as f64,
    )?;
    let mut out = Vec::with_capacity(dets.len());
    'next: for d in dets {
        let mut b = d.bbox;
        for r in chain.iter().rev() {
            match r.inverse_box(&b)? {
                Some(m) => b = m,
                None => continue 'next,
            }
        }
        if let Some(b) = b.intersect(&frame) {
            out.push(Detection { bbox: b, ..*d });
        }
    }
    Ok(out)
}

/// Detections from one augmented copy and the transforms that produced it.
/// An empty chain is the identity copy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtaCopy {
    pub chain: Vec<TransformRecord>,
    pub detections: Vec<Detection>,
}

/// All augmented copies of one source image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtaBundle {
    pub image_id: String,
    pub copies: Vec<TtaCopy>,
}

impl TtaBundle {
    pub fn validate(&self) -> Result<()> {
        for (i, c) in self.copies.iter().enumerate() {
            if let Some(r) = c.chain.iter().find(|r| !r.geometry_invertible()) {
                return Err(Error::NonInvertible(format!(
                    "{:?} in copy {i} of {}",
                    r.kind(),
                    self.image_id
                )));
            }
            for pair in c.chain.windows(2) {
                if pair[0].output_size() != (pair[1].source_width, pair[1].source_height) {
                    return Err(Error::validation(format!(
                        "copy {i} of {}: transform chain sizes do not line up",
                        self.image_id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Maps every copy back to the source frame, pools the detections, filters
/// by confidence and applies NMS.
pub fn tta_fuse(bundle: &TtaBundle, conf_threshold: f64, nms_iou: f64) -> Result<Vec<Detection>> {
    check_conf(conf_threshold)?;
    check_iou(nms_iou)?;
    bundle.validate()?;
    let mut pooled = Vec::new();
    for c in &bundle.copies {
        pooled.extend(inverse_map_chain(&c.detections, &c.chain)?);
    }
    nms(&confidence_filter(&pooled, conf_threshold)?, nms_iou)
}

/// Fuses many bundles in parallel.
pub fn tta_fuse_all(
    bundles: &[TtaBundle],
    conf_threshold: f64,
    nms_iou: f64,
) -> Result<Predictions> {
    bundles
        .par_iter()
        .map(|b| Ok((b.image_id.clone(), tta_fuse(b, conf_threshold, nms_iou)?)))
        .collect()
}

/// The ten TTA recipes, each a list of kinds in application order: identity,
/// hflip, vflip, hflip then vflip, invert, hflip then invert, vflip then
/// invert, and three bbox-safe crops.
pub fn standard_tta_set() -> Vec<Vec<TransformKind>> {
    use TransformKind::*;
    vec![
        vec![],
        vec![Hflip],
        vec![Vflip],
        vec![Hflip, Vflip],
        vec![Invert],
        vec![Hflip, Invert],
        vec![Vflip, Invert],
        vec![SafeCrop],
        vec![SafeCrop],
        vec![SafeCrop],
    ]
}

/// Sidecar entry describing one emitted copy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtaCopySpec {
    pub copy_id: String,
    pub source_image_id: String,
    pub chain: Vec<TransformRecord>,
}

pub fn tta_copy_id(image_id: &str, index: usize) -> String {
    format!("{image_id}_tta{index}")
}

fn apply_kind(
    r: &ImageRecord,
    kind: TransformKind,
    rng: &mut crate::rng::Rng,
) -> Result<(ImageRecord, TransformRecord)> {
    match kind {
        TransformKind::Hflip => hflip(r),
        TransformKind::Vflip => vflip(r),
        TransformKind::Invert => invert(r),
        TransformKind::SafeCrop if r.annotations.is_empty() => {
            let (w, h) = (r.width as f64, r.height as f64);
            let (mx, my) = (
                w * (1.0 - TTA_CROP_CORE) / 2.0,
                h * (1.0 - TTA_CROP_CORE) / 2.0,
            );
            let core = BBox::new(mx, my, w - mx, h - my)?;
            crop_protecting(r, &core, rng)
        }
        TransformKind::SafeCrop => bbox_safe_crop(r, rng),
        other => Err(Error::validation(format!(
            "{other:?} is not supported in TTA recipes"
        ))),
    }
}

/// Materializes `recipes` for one image. Randomness for copy `k` comes from
/// the substream keyed by `(seed, image_id, k)`. Crops of unannotated images
/// protect the central region.
pub fn tta_copies(
    r: &ImageRecord,
    recipes: &[Vec<TransformKind>],
    seed: u64,
) -> Result<Vec<(ImageRecord, TtaCopySpec)>> {
    recipes
        .iter()
        .enumerate()
        .map(|(k, recipe)| {
            let mut rng = substream(seed, &r.image_id, k as u64);
            let mut current = r.clone();
            let mut chain = Vec::with_capacity(recipe.len());
            for &kind in recipe {
                let (next, rec) = apply_kind(&current, kind, &mut rng)?;
                current = next;
                chain.push(rec);
            }
            current.image_id = tta_copy_id(&r.image_id, k);
            let spec = TtaCopySpec {
                copy_id: current.image_id.clone(),
                source_image_id: r.image_id.clone(),
                chain,
            };
            Ok((current, spec))
        })
        .collect()
}

/// Emits the standard ten copies of every image in the dataset.
pub fn tta_emit(dataset: &Dataset, seed: u64) -> Result<Vec<(ImageRecord, TtaCopySpec)>> {
    let recipes = standard_tta_set();
    let per_image: Vec<Vec<_>> = dataset
        .records()
        .par_iter()
        .map(|r| tta_copies(r, &recipes, seed))
        .collect::<Result<_>>()?;
    Ok(per_image.into_iter().flatten().collect())
}

/// Groups detections made on emitted copies into bundles using the sidecar
/// specs. Copies without detections contribute nothing; detections for ids
/// not in the sidecar are an error.
pub fn bundles_from(specs: &[TtaCopySpec], predictions: &Predictions) -> Result<Vec<TtaBundle>> {
    let known: BTreeMap<&str, &TtaCopySpec> =
        specs.iter().map(|s| (s.copy_id.as_str(), s)).collect();
    let unknown: Vec<String> = predictions
        .keys()
        .filter(|k| !known.contains_key(k.as_str()))
        .cloned()
        .collect();
    if !unknown.is_empty() {
        return Err(Error::UnknownImages(unknown));
    }
    let mut grouped: BTreeMap<&str, Vec<TtaCopy>> = BTreeMap::new();
    for s in specs {
        grouped
            .entry(&s.source_image_id)
            .or_default()
            .push(TtaCopy {
                chain: s.chain.clone(),
                detections: predictions.get(&s.copy_id).cloned().unwrap_or_default(),
            });
    }
    Ok(grouped
        .into_iter()
        .map(|(id, copies)| TtaBundle {
            image_id: id.to_string(),
            copies,
        })
        .collect())
}
