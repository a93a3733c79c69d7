//! Seedable image + annotation transforms with exact box remapping.
//!
//! Every operation returns the transformed record together with a
//! [`TransformRecord`] describing what was done, so boxes predicted on the
//! transformed image can be mapped back to the source frame.

mod geometric;
mod photometric;
mod pipeline;
mod raster;

use serde::{Deserialize, Serialize};

use crate::dataset::ImageRecord;
use crate::error::{Error, Result};
use crate::geometry::BBox;

pub use geometric::{
    bbox_safe_crop, crop_protecting, hflip, mosaic, mosaic_at, scale, vflip, MAX_SCALE, MIN_SCALE,
};
pub use photometric::{
    brightness_contrast, gaussian_filter, hist_equalize, hue_contrast, invert, invert_with,
    mean_normalize, median_blur, INVERT_CONSTANT,
};
pub use pipeline::{parse_pipeline_spec, pipeline, AugmentOp, AugmentStep};

/// Gray level used for padding when an image is shrunk.
pub const PAD_VALUE: u8 = 114;

/// Boxes keeping less than this fraction of their area after clipping are dropped.
pub const MIN_RETAINED_AREA: f64 = 0.25;

/// Boxes thinner than this many pixels after clipping are dropped.
pub const MIN_BOX_SIDE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TransformKind {
    Hflip,
    Vflip,
    Scale,
    Invert,
    SafeCrop,
    Mosaic,
    MeanNorm,
    Gaussian,
    HistEq,
    HueContrast,
    MedianBlur,
    BrightnessContrast,
}

impl TransformKind {
    pub fn is_photometric(self) -> bool {
        !matches!(
            self,
            TransformKind::Hflip
                | TransformKind::Vflip
                | TransformKind::Scale
                | TransformKind::SafeCrop
                | TransformKind::Mosaic
        )
    }
}

/// A transform as applied, with the parameters needed to replay or invert it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Transform {
    Hflip,
    Vflip,
    Scale {
        factor: f64,
    },
    Invert {
        constant: u8,
    },
    SafeCrop {
        x: u32,
        y: u32,
        width: u32,
        height: u32,
    },
    Mosaic {
        pivot_x: u32,
        pivot_y: u32,
        quadrant: u8,
    },
    MeanNorm {
        means: [f64; 3],
    },
    Gaussian {
        sigma: f64,
        ksize: u32,
    },
    HistEq,
    HueContrast {
        hue: f64,
        contrast: f64,
    },
    MedianBlur {
        ksize: u32,
    },
    BrightnessContrast {
        brightness: f64,
        contrast: f64,
    },
}

impl Transform {
    pub fn kind(&self) -> TransformKind {
        match self {
            Transform::Hflip => TransformKind::Hflip,
            Transform::Vflip => TransformKind::Vflip,
            Transform::Scale { .. } => TransformKind::Scale,
            Transform::Invert { .. } => TransformKind::Invert,
            Transform::SafeCrop { .. } => TransformKind::SafeCrop,
            Transform::Mosaic { .. } => TransformKind::Mosaic,
            Transform::MeanNorm { .. } => TransformKind::MeanNorm,
            Transform::Gaussian { .. } => TransformKind::Gaussian,
            Transform::HistEq => TransformKind::HistEq,
            Transform::HueContrast { .. } => TransformKind::HueContrast,
            Transform::MedianBlur { .. } => TransformKind::MedianBlur,
            Transform::BrightnessContrast { .. } => TransformKind::BrightnessContrast,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformRecord {
    #[serde(flatten)]
    pub transform: Transform,
    /// Size of the image the transform was applied to.
    pub source_width: u32,
    pub source_height: u32,
}

impl TransformRecord {
    pub fn new(transform: Transform, source_width: u32, source_height: u32) -> Self {
        Self {
            transform,
            source_width,
            source_height,
        }
    }

    pub fn kind(&self) -> TransformKind {
        self.transform.kind()
    }

    /// Whether boxes in the output frame can be mapped back to the source frame.
    /// Photometric transforms have identity geometry and qualify.
    pub fn geometry_invertible(&self) -> bool {
        self.kind() != TransformKind::Mosaic
    }

    /// Size of the image this transform produced.
    pub fn output_size(&self) -> (u32, u32) {
        match self.transform {
            Transform::SafeCrop { width, height, .. } => (width, height),
            _ => (self.source_width, self.source_height),
        }
    }

    /// Maps a source-frame box into the output frame without clipping.
    pub fn forward_box(&self, b: &BBox) -> Result<Option<BBox>> {
        let (w, h) = (self.source_width as f64, self.source_height as f64);
        Ok(match self.transform {
            Transform::Hflip => BBox::new(w - b.x_max(), b.y_min(), w - b.x_min(), b.y_max()).ok(),
            Transform::Vflip => BBox::new(b.x_min(), h - b.y_max(), b.x_max(), h - b.y_min()).ok(),
            Transform::Scale { factor } => {
                let (cx, cy) = (w / 2.0, h / 2.0);
                b.affine(factor, cx - cx * factor, factor, cy - cy * factor)
            }
            Transform::SafeCrop { x, y, .. } => b.translate(-(x as f64), -(y as f64)),
            Transform::Mosaic { .. } => {
                return Err(Error::NonInvertible("MOSAIC".into()));
            }
            _ => Some(*b),
        })
    }

    /// Maps an output-frame box back into the source frame without clipping.
    pub fn inverse_box(&self, b: &BBox) -> Result<Option<BBox>> {
        let (w, h) = (self.source_width as f64, self.source_height as f64);
        Ok(match self.transform {
            Transform::Hflip => BBox::new(w - b.x_max(), b.y_min(), w - b.x_min(), b.y_max()).ok(),
            Transform::Vflip => BBox::new(b.x_min(), h - b.y_max(), b.x_max(), h - b.y_min()).ok(),
            Transform::Scale { factor } => {
                let (cx, cy) = (w / 2.0, h / 2.0);
                BBox::new(
                    (b.x_min() - cx) / factor + cx,
                    (b.y_min() - cy) / factor + cy,
                    (b.x_max() - cx) / factor + cx,
                    (b.y_max() - cy) / factor + cy,
                )
                .ok()
            }
            Transform::SafeCrop { x, y, .. } => b.translate(x as f64, y as f64),
            Transform::Mosaic { .. } => {
                return Err(Error::NonInvertible("MOSAIC".into()));
            }
            _ => Some(*b),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceEntry {
    pub source_image_id: String,
    pub transform: TransformRecord,
}

/// An augmented image and the transforms that produced it, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedRecord {
    pub image: ImageRecord,
    pub provenance: Vec<ProvenanceEntry>,
}
