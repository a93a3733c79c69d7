//! Images, annotations and the competition's annotation formats.

mod darknet;
mod io;
mod split;
mod submission;
mod voc;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;

pub use darknet::{parse_darknet, write_darknet};
pub use io::{
    find_image_file, load_annotations, load_darknet_dir, load_dataset_dir, load_pixels,
    load_submission, load_voc_dir, save_pixels, write_darknet_dir, write_voc_dir, DirFormat,
};
pub use split::{split, SplitFractions};
pub use submission::{
    parse_ground_truth, parse_submission, write_ground_truth, write_submission, Predictions,
};
pub use voc::{parse_voc, write_voc};

/// The seven distress labels. Ordinals are fixed and shared by every format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DistressClass {
    Alligator = 0,
    Block = 1,
    Transverse = 2,
    Patching = 3,
    Sealing = 4,
    Longitudinal = 5,
    Manhole = 6,
}

impl DistressClass {
    pub const COUNT: usize = 7;

    pub const ALL: [DistressClass; 7] = [
        DistressClass::Alligator,
        DistressClass::Block,
        DistressClass::Transverse,
        DistressClass::Patching,
        DistressClass::Sealing,
        DistressClass::Longitudinal,
        DistressClass::Manhole,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(ordinal: i64) -> Result<Self> {
        usize::try_from(ordinal)
            .ok()
            .and_then(|i| Self::ALL.get(i).copied())
            .ok_or_else(|| Error::UnknownClass(ordinal.to_string()))
    }

    pub fn name(self) -> &'static str {
        match self {
            DistressClass::Alligator => "Alligator",
            DistressClass::Block => "Block",
            DistressClass::Transverse => "Transverse",
            DistressClass::Patching => "Patching",
            DistressClass::Sealing => "Sealing",
            DistressClass::Longitudinal => "Longitudinal",
            DistressClass::Manhole => "Manhole",
        }
    }
}

impl fmt::Display for DistressClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistressClass {
    type Err = Error;

    /// Case-insensitive match against the class names.
    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim();
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name().eq_ignore_ascii_case(trimmed))
            .ok_or_else(|| Error::UnknownClass(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub bbox: BBox,
    pub label: DistressClass,
}

impl Annotation {
    pub fn new(bbox: BBox, label: DistressClass) -> Self {
        Self { bbox, label }
    }
}

/// A model output: a labeled box with a confidence in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub label: DistressClass,
    pub confidence: f64,
}

impl Detection {
    pub fn new(bbox: BBox, label: DistressClass, confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::validation(format!(
                "confidence {confidence} is outside [0, 1]"
            )));
        }
        Ok(Self {
            bbox,
            label,
            confidence,
        })
    }

    pub fn to_annotation(&self) -> Annotation {
        Annotation::new(self.bbox, self.label)
    }
}

impl From<Annotation> for Detection {
    /// Ground truth as a prediction with full confidence.
    fn from(a: Annotation) -> Self {
        Detection {
            bbox: a.bbox,
            label: a.label,
            confidence: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ImageSource {
    Aran,
    StreetView,
    Synthetic,
    #[default]
    Unknown,
}

/// One image: metadata, optional pixels, and its annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub pixels: Option<RgbImage>,
    pub annotations: Vec<Annotation>,
    pub source: ImageSource,
}

impl ImageRecord {
    pub fn new(
        image_id: impl Into<String>,
        width: u32,
        height: u32,
        annotations: Vec<Annotation>,
    ) -> Result<Self> {
        let record = Self {
            image_id: image_id.into(),
            width,
            height,
            pixels: None,
            annotations,
            source: ImageSource::Unknown,
        };
        record.validate()?;
        Ok(record)
    }

    /// Builds a record from a raster; width and height are taken from it.
    pub fn with_pixels(
        image_id: impl Into<String>,
        pixels: RgbImage,
        annotations: Vec<Annotation>,
    ) -> Result<Self> {
        let (width, height) = pixels.dimensions();
        let record = Self {
            image_id: image_id.into(),
            width,
            height,
            pixels: Some(pixels),
            annotations,
            source: ImageSource::Unknown,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::validation(format!(
                "image {:?} has zero size {}x{}",
                self.image_id, self.width, self.height
            )));
        }
        if let Some(px) = &self.pixels {
            if px.dimensions() != (self.width, self.height) {
                return Err(Error::validation(format!(
                    "image {:?}: raster is {}x{} but record says {}x{}",
                    self.image_id,
                    px.width(),
                    px.height(),
                    self.width,
                    self.height
                )));
            }
        }
        for (i, a) in self.annotations.iter().enumerate() {
            if !a.bbox.within(self.width as f64, self.height as f64) {
                return Err(Error::validation(format!(
                    "image {:?}: annotation {i} box {:?} lies outside {}x{}",
                    self.image_id,
                    a.bbox.to_array(),
                    self.width,
                    self.height
                )));
            }
        }
        Ok(())
    }

    pub fn require_pixels(&self) -> Result<&RgbImage> {
        self.pixels
            .as_ref()
            .ok_or_else(|| Error::MissingPixels(self.image_id.clone()))
    }

    /// Copy of the record with different pixels and annotations, same identity.
    pub(crate) fn derive(&self, pixels: RgbImage, annotations: Vec<Annotation>) -> ImageRecord {
        let (width, height) = pixels.dimensions();
        ImageRecord {
            image_id: self.image_id.clone(),
            width,
            height,
            pixels: Some(pixels),
            annotations,
            source: self.source,
        }
    }
}

/// An ordered collection of images with unique ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    records: Vec<ImageRecord>,
    index: HashMap<String, usize>,
}

impl Dataset {
    pub fn new(records: Vec<ImageRecord>) -> Result<Self> {
        let mut index = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if index.insert(r.image_id.clone(), i).is_some() {
                return Err(Error::validation(format!(
                    "duplicate image id {:?}",
                    r.image_id
                )));
            }
        }
        Ok(Self { records, index })
    }

    /// The label set every dataset is defined over.
    pub fn classes(&self) -> &'static [DistressClass] {
        &DistressClass::ALL
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, image_id: &str) -> Option<&ImageRecord> {
        self.index.get(image_id).map(|&i| &self.records[i])
    }

    pub fn contains(&self, image_id: &str) -> bool {
        self.index.contains_key(image_id)
    }

    pub fn records(&self) -> &[ImageRecord] {
        &self.records
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ImageRecord> {
        self.records.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.image_id.as_str())
    }

    pub fn into_records(self) -> Vec<ImageRecord> {
        self.records
    }

    pub fn annotation_count(&self) -> usize {
        self.records.iter().map(|r| r.annotations.len()).sum()
    }

    /// Every annotation reinterpreted as a confidence-1 detection.
    pub fn as_predictions(&self) -> Predictions {
        self.records
            .iter()
            .map(|r| {
                (
                    r.image_id.clone(),
                    r.annotations.iter().copied().map(Detection::from).collect(),
                )
            })
            .collect()
    }

    /// Records sorted by image id.
    pub fn sorted_by_id(&self) -> Vec<&ImageRecord> {
        let mut v: Vec<&ImageRecord> = self.records.iter().collect();
        v.sort_by(|a, b| a.image_id.cmp(&b.image_id));
        v
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a ImageRecord;
    type IntoIter = std::slice::Iter<'a, ImageRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}
