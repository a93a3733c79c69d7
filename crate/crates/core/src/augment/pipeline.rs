//! Probabilistic augmentation chains applied over a whole dataset.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{
    bbox_safe_crop, brightness_contrast, gaussian_filter, hflip, hist_equalize, hue_contrast,
    invert_with, mean_normalize, median_blur, mosaic, scale, vflip, AugmentedRecord,
    ProvenanceEntry, TransformKind, INVERT_CONSTANT, MAX_SCALE, MIN_SCALE,
};
use crate::dataset::{Dataset, ImageRecord};
use crate::error::{Error, Result};
use crate::rng::{substream, Rng as StreamRng};

/// One augmentation with its sampling ranges. Ranged parameters are drawn
/// uniformly each time the step fires; `hue`, `contrast` and `brightness` are
/// maximum magnitudes sampled in `[-max, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AugmentOp {
    Hflip,
    Vflip,
    Scale { min: f64, max: f64 },
    Invert { constant: u8 },
    SafeCrop,
    Mosaic,
    MeanNorm,
    Gaussian { sigma: f64, ksize: u32 },
    HistEq,
    HueContrast { hue: f64, contrast: f64 },
    MedianBlur { ksize: u32 },
    BrightnessContrast { brightness: f64, contrast: f64 },
}

impl AugmentOp {
    pub fn kind(&self) -> TransformKind {
        match self {
            AugmentOp::Hflip => TransformKind::Hflip,
            AugmentOp::Vflip => TransformKind::Vflip,
            AugmentOp::Scale { .. } => TransformKind::Scale,
            AugmentOp::Invert { .. } => TransformKind::Invert,
            AugmentOp::SafeCrop => TransformKind::SafeCrop,
            AugmentOp::Mosaic => TransformKind::Mosaic,
            AugmentOp::MeanNorm => TransformKind::MeanNorm,
            AugmentOp::Gaussian { .. } => TransformKind::Gaussian,
            AugmentOp::HistEq => TransformKind::HistEq,
            AugmentOp::HueContrast { .. } => TransformKind::HueContrast,
            AugmentOp::MedianBlur { .. } => TransformKind::MedianBlur,
            AugmentOp::BrightnessContrast { .. } => TransformKind::BrightnessContrast,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentStep {
    pub op: AugmentOp,
    pub probability: f64,
}

impl AugmentStep {
    pub fn new(op: AugmentOp, probability: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&probability) {
            return Err(Error::validation(format!(
                "probability {probability} outside [0, 1]"
            )));
        }
        validate_op(&op)?;
        Ok(Self { op, probability })
    }
}

fn validate_op(op: &AugmentOp) -> Result<()> {
    let odd = |k: u32| k % 2 == 1;
    let ok = match *op {
        AugmentOp::Scale { min, max } => {
            (MIN_SCALE..=MAX_SCALE).contains(&min)
                && (MIN_SCALE..=MAX_SCALE).contains(&max)
                && min <= max
        }
        AugmentOp::Gaussian { sigma, ksize } => sigma > 0.0 && sigma.is_finite() && odd(ksize),
        AugmentOp::MedianBlur { ksize } => odd(ksize),
        AugmentOp::HueContrast { hue, contrast } => {
            hue.is_finite() && hue >= 0.0 && (0.0..1.0).contains(&contrast)
        }
        AugmentOp::BrightnessContrast {
            brightness,
            contrast,
        } => (0.0..=255.0).contains(&brightness) && (0.0..1.0).contains(&contrast),
        _ => true,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::validation(format!("invalid parameters for {op:?}")))
    }
}

struct Params<'a> {
    index: usize,
    map: &'a Map<String, Value>,
}

impl Params<'_> {
    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v.as_f64().ok_or_else(|| {
                Error::schema(format!("[{}].params.{key}", self.index), "must be a number")
            }),
        }
    }

    fn u32_or(&self, key: &str, default: u32) -> Result<u32> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_u64()
                .and_then(|n| u32::try_from(n).ok())
                .ok_or_else(|| {
                    Error::schema(
                        format!("[{}].params.{key}", self.index),
                        "must be a non-negative integer",
                    )
                }),
        }
    }

    fn only(&self, allowed: &[&str]) -> Result<()> {
        match self.map.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::schema(
                format!("[{}].params.{k}", self.index),
                "unknown parameter",
            )),
            None => Ok(()),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStep {
    kind: TransformKind,
    #[serde(default)]
    params: Map<String, Value>,
    #[serde(default = "always")]
    probability: f64,
}

fn always() -> f64 {
    1.0
}

/// Parses a pipeline spec: a JSON array of `{kind, params, probability}`.
///
/// | kind | params (defaults) |
/// |---|---|
/// | `SCALE` | `factor`, or `min` / `max` (0.5 / 1.5) |
/// | `INVERT` | `constant` (255) |
/// | `GAUSSIAN` | `sigma` (1.0), `ksize` (5) |
/// | `HUE_CONTRAST` | `hue` degrees (15), `contrast` (0.2) |
/// | `MEDIAN_BLUR` | `ksize` (3) |
/// | `BRIGHTNESS_CONTRAST` | `brightness` (32), `contrast` (0.2) |
///
/// Other kinds take no parameters.
pub fn parse_pipeline_spec(json_text: &str) -> Result<Vec<AugmentStep>> {
    let raw: Vec<RawStep> = serde_json::from_str(json_text).map_err(|e| Error::Parse {
        source_name: "augmentation spec".into(),
        line: Some(e.line()),
        message: e.to_string(),
    })?;
    raw.iter()
        .enumerate()
        .map(|(index, s)| {
            let p = Params {
                index,
                map: &s.params,
            };
            let op = match s.kind {
                TransformKind::Hflip => p.only(&[]).map(|_| AugmentOp::Hflip)?,
                TransformKind::Vflip => p.only(&[]).map(|_| AugmentOp::Vflip)?,
                TransformKind::SafeCrop => p.only(&[]).map(|_| AugmentOp::SafeCrop)?,
                TransformKind::Mosaic => p.only(&[]).map(|_| AugmentOp::Mosaic)?,
                TransformKind::MeanNorm => p.only(&[]).map(|_| AugmentOp::MeanNorm)?,
                TransformKind::HistEq => p.only(&[]).map(|_| AugmentOp::HistEq)?,
                TransformKind::Scale => {
                    p.only(&["factor", "min", "max"])?;
                    if s.params.contains_key("factor") {
                        let f = p.f64_or("factor", 1.0)?;
                        AugmentOp::Scale { min: f, max: f }
                    } else {
                        AugmentOp::Scale {
                            min: p.f64_or("min", 0.5)?,
                            max: p.f64_or("max", 1.5)?,
                        }
                    }
                }
                TransformKind::Invert => {
                    p.only(&["constant"])?;
                    let c = p.u32_or("constant", INVERT_CONSTANT as u32)?;
                    let constant = u8::try_from(c).map_err(|_| {
                        Error::schema(format!("[{index}].params.constant"), "must be at most 255")
                    })?;
                    AugmentOp::Invert { constant }
                }
                TransformKind::Gaussian => {
                    p.only(&["sigma", "ksize"])?;
                    AugmentOp::Gaussian {
                        sigma: p.f64_or("sigma", 1.0)?,
                        ksize: p.u32_or("ksize", 5)?,
                    }
                }
                TransformKind::HueContrast => {
                    p.only(&["hue", "contrast"])?;
                    AugmentOp::HueContrast {
                        hue: p.f64_or("hue", 15.0)?,
                        contrast: p.f64_or("contrast", 0.2)?,
                    }
                }
                TransformKind::MedianBlur => {
                    p.only(&["ksize"])?;
                    AugmentOp::MedianBlur {
                        ksize: p.u32_or("ksize", 3)?,
                    }
                }
                TransformKind::BrightnessContrast => {
                    p.only(&["brightness", "contrast"])?;
                    AugmentOp::BrightnessContrast {
                        brightness: p.f64_or("brightness", 32.0)?,
                        contrast: p.f64_or("contrast", 0.2)?,
                    }
                }
            };
            AugmentStep::new(op, s.probability)
                .map_err(|e| Error::validation(format!("step {index}: {e}")))
        })
        .collect()
}

fn symmetric(rng: &mut StreamRng, max: f64) -> f64 {
    if max == 0.0 {
        0.0
    } else {
        rng.random_range(-max..=max)
    }
}

fn augment_one(
    source: &ImageRecord,
    by_id: &[&ImageRecord],
    steps: &[AugmentStep],
    rng: &mut StreamRng,
) -> Result<AugmentedRecord> {
    let mut current = source.clone();
    let mut provenance = Vec::new();
    for step in steps {
        let roll: f64 = rng.random();
        if roll >= step.probability {
            continue;
        }
        let (next, record) = match step.op {
            AugmentOp::Mosaic => {
                let mut partner = || by_id[rng.random_range(0..by_id.len())];
                let (a, b, c) = (partner(), partner(), partner());
                let out = mosaic([&current, a, b, c], rng)?;
                // the first quadrant holds the chain so far
                let mut entries = out.provenance.into_iter();
                if let Some(first) = entries.next() {
                    provenance.push(ProvenanceEntry {
                        source_image_id: source.image_id.clone(),
                        ..first
                    });
                }
                provenance.extend(entries);
                current = out.image;
                continue;
            }
            AugmentOp::Hflip => hflip(&current)?,
            AugmentOp::Vflip => vflip(&current)?,
            AugmentOp::Scale { min, max } => {
                let f = if min == max {
                    min
                } else {
                    rng.random_range(min..=max)
                };
                scale(&current, f)?
            }
            AugmentOp::Invert { constant } => invert_with(&current, constant)?,
            AugmentOp::SafeCrop => bbox_safe_crop(&current, rng)?,
            AugmentOp::MeanNorm => mean_normalize(&current)?,
            AugmentOp::Gaussian { sigma, ksize } => gaussian_filter(&current, sigma, ksize)?,
            AugmentOp::HistEq => hist_equalize(&current)?,
            AugmentOp::HueContrast { hue, contrast } => {
                let dh = symmetric(rng, hue);
                let dc = symmetric(rng, contrast);
                hue_contrast(&current, dh, dc)?
            }
            AugmentOp::MedianBlur { ksize } => median_blur(&current, ksize)?,
            AugmentOp::BrightnessContrast {
                brightness,
                contrast,
            } => {
                let db = symmetric(rng, brightness);
                let dc = symmetric(rng, contrast);
                brightness_contrast(&current, db, dc)?
            }
        };
        provenance.push(ProvenanceEntry {
            source_image_id: source.image_id.clone(),
            transform: record,
        });
        current = next;
    }
    Ok(AugmentedRecord {
        image: current,
        provenance,
    })
}

/// Produces `multiplier` augmented copies of every image.
///
/// Copy `k` of image `id` draws all of its randomness from the substream
/// keyed by `(seed, id, k)`, so the output is independent of dataset order and
/// of how work is scheduled across threads. Mosaic partners are drawn from
/// the dataset in id order. Outputs keep the source id when `multiplier` is 1
/// and are named `<id>_aug<k>` otherwise.
pub fn pipeline(
    dataset: &Dataset,
    steps: &[AugmentStep],
    seed: u64,
    multiplier: usize,
) -> Result<Vec<AugmentedRecord>> {
    if multiplier == 0 {
        return Err(Error::validation("multiplier must be at least 1"));
    }
    for s in steps {
        validate_op(&s.op)?;
    }
    let by_id = dataset.sorted_by_id();
    let jobs: Vec<(&ImageRecord, usize)> = dataset
        .iter()
        .flat_map(|r| (0..multiplier).map(move |k| (r, k)))
        .collect();
    jobs.into_par_iter()
        .map(|(source, k)| {
            let mut rng = substream(seed, &source.image_id, k as u64);
            let mut out = augment_one(source, &by_id, steps, &mut rng)?;
            if multiplier > 1 {
                out.image.image_id = format!("{}_aug{k}", source.image_id);
            }
            Ok(out)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Annotation, DistressClass};
    use crate::geometry::BBox;
    use image::{Rgb, RgbImage};

    fn dataset(n: usize) -> Dataset {
        Dataset::new(
            (0..n)
                .map(|i| {
                    let px = RgbImage::from_fn(32, 24, |x, y| {
                        Rgb([(x * 8) as u8, (y * 10) as u8, i as u8])
                    });
                    let ann = Annotation::new(
                        BBox::new(4.0, 4.0, 12.0 + i as f64, 14.0).unwrap(),
                        DistressClass::ALL[i % 7],
                    );
                    ImageRecord::with_pixels(format!("im{i}"), px, vec![ann]).unwrap()
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn empty_spec_is_identity() {
        let d = dataset(3);
        let out = pipeline(&d, &[], 1, 1).unwrap();
        let images: Vec<_> = out.iter().map(|a| a.image.clone()).collect();
        assert_eq!(images, d.records());
        assert!(out.iter().all(|a| a.provenance.is_empty()));
    }

    #[test]
    fn always_hflip_twice() {
        let d = dataset(3);
        let steps = [AugmentStep::new(AugmentOp::Hflip, 1.0).unwrap()];
        let out = pipeline(&d, &steps, 5, 2).unwrap();
        assert_eq!(out.len(), 6);
        for (i, a) in out.iter().enumerate() {
            let src = &d.records()[i / 2];
            assert_eq!(a.image.image_id, format!("{}_aug{}", src.image_id, i % 2));
            assert_eq!(a.image.pixels, hflip(src).unwrap().0.pixels);
            assert_eq!(a.provenance.len(), 1);
        }
    }

    #[test]
    fn deterministic_and_order_independent() {
        let spec = r#"[
            {"kind": "MOSAIC", "probability": 0.5},
            {"kind": "HFLIP", "probability": 0.5},
            {"kind": "SCALE", "params": {"min": 0.6, "max": 1.4}, "probability": 0.7},
            {"kind": "SAFE_CROP", "probability": 0.5},
            {"kind": "BRIGHTNESS_CONTRAST", "probability": 0.5}
        ]"#;
        let steps = parse_pipeline_spec(spec).unwrap();
        let d = dataset(5);
        let a = pipeline(&d, &steps, 99, 3).unwrap();
        let b = pipeline(&d, &steps, 99, 3).unwrap();
        assert_eq!(a, b);
        let mut rev = d.records().to_vec();
        rev.reverse();
        let c = pipeline(&Dataset::new(rev).unwrap(), &steps, 99, 3).unwrap();
        for x in &a {
            let y = c
                .iter()
                .find(|y| y.image.image_id == x.image.image_id)
                .unwrap();
            assert_eq!(x, y);
        }
        for x in &a {
            x.image.validate().unwrap();
        }
        assert_ne!(a, pipeline(&d, &steps, 100, 3).unwrap());
    }

    #[test]
    fn spec_errors() {
        assert!(matches!(
            parse_pipeline_spec(r#"[{"kind":"ROTATE"}]"#),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_pipeline_spec(r#"[{"kind":"HFLIP","params":{"x":1}}]"#),
            Err(Error::Schema { path, .. }) if path == "[0].params.x"
        ));
        assert!(matches!(
            parse_pipeline_spec(r#"[{"kind":"MEDIAN_BLUR","params":{"ksize":4}}]"#),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            parse_pipeline_spec(r#"[{"kind":"SCALE","params":{"factor":3}}]"#),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            parse_pipeline_spec(r#"[{"kind":"HFLIP","probability":1.2}]"#),
            Err(Error::Validation(_))
        ));
        assert!(pipeline(&dataset(1), &[], 0, 0).is_err());
    }

    #[test]
    fn spec_defaults() {
        let steps = parse_pipeline_spec(
            r#"[{"kind":"GAUSSIAN"},{"kind":"INVERT","params":{"constant":225}},{"kind":"SCALE","params":{"factor":2}}]"#,
        )
        .unwrap();
        assert_eq!(
            steps[0].op,
            AugmentOp::Gaussian {
                sigma: 1.0,
                ksize: 5
            }
        );
        assert_eq!(steps[0].probability, 1.0);
        assert_eq!(steps[1].op, AugmentOp::Invert { constant: 225 });
        assert_eq!(steps[2].op, AugmentOp::Scale { min: 2.0, max: 2.0 });
    }
}
