//! DarkNet (YOLO) label files: one `class cx cy w h` line per box, normalized.

use std::fmt::Write as _;

use super::{Annotation, DistressClass, ImageRecord};
use crate::error::{Error, Result};
use crate::geometry::BBox;

/// Normalized edges this far outside `[0, 1]` are treated as decimal rounding
/// from a previous write and clamped back onto the image border.
const EDGE_SLACK: f64 = 1e-6;

fn parse_err(image_id: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        source_name: format!("DarkNet labels for {image_id:?}"),
        line: Some(line),
        message: message.into(),
    }
}

fn denormalize_edge(v: f64, extent: f64) -> Option<f64> {
    if !(-EDGE_SLACK..=1.0 + EDGE_SLACK).contains(&v) {
        None
    } else {
        Some(v.clamp(0.0, 1.0) * extent)
    }
}

/// Parses DarkNet label lines for an image of the given pixel size.
pub fn parse_darknet(txt: &str, width: u32, height: u32, image_id: &str) -> Result<ImageRecord> {
    let (w, h) = (width as f64, height as f64);
    let mut annotations = Vec::new();
    for (i, line) in txt.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(parse_err(
                image_id,
                lineno,
                format!("expected 5 fields, found {}", fields.len()),
            ));
        }
        let class_index: i64 = fields[0].parse().map_err(|_| {
            parse_err(
                image_id,
                lineno,
                format!("class index {:?} is not an integer", fields[0]),
            )
        })?;
        let label = DistressClass::from_ordinal(class_index)?;
        let mut vals = [0.0f64; 4];
        for (slot, raw) in vals.iter_mut().zip(&fields[1..]) {
            let v: f64 = raw
                .parse()
                .map_err(|_| parse_err(image_id, lineno, format!("{raw:?} is not a number")))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(format!(
                    "{image_id:?} line {lineno}: normalized value {v} outside [0, 1]"
                )));
            }
            *slot = v;
        }
        let [cx, cy, bw, bh] = vals;
        let edges = (
            denormalize_edge(cx - bw / 2.0, w),
            denormalize_edge(cy - bh / 2.0, h),
            denormalize_edge(cx + bw / 2.0, w),
            denormalize_edge(cy + bh / 2.0, h),
        );
        let (Some(x0), Some(y0), Some(x1), Some(y1)) = edges else {
            return Err(Error::validation(format!(
                "{image_id:?} line {lineno}: box extends outside the image"
            )));
        };
        let bbox = BBox::new(x0, y0, x1, y1)
            .map_err(|e| Error::validation(format!("{image_id:?} line {lineno}: {e}")))?;
        annotations.push(Annotation::new(bbox, label));
    }
    ImageRecord::new(image_id, width, height, annotations)
}

/// Writes one normalized line per annotation with six fractional digits.
pub fn write_darknet(record: &ImageRecord) -> String {
    let (w, h) = (record.width as f64, record.height as f64);
    let mut s = String::new();
    for a in &record.annotations {
        let (cx, cy) = a.bbox.center();
        let _ = writeln!(
            s,
            "{} {:.6} {:.6} {:.6} {:.6}",
            a.label.ordinal(),
            cx / w,
            cy / h,
            a.bbox.width() / w,
            a.bbox.height() / h
        );
    }
    s
}
