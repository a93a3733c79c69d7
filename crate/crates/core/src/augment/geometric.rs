use image::{imageops, Rgb, RgbImage};
use rand::Rng;

use super::raster::{bilinear, resize};
use super::{
    AugmentedRecord, ProvenanceEntry, Transform, TransformRecord, MIN_BOX_SIDE, MIN_RETAINED_AREA,
    PAD_VALUE,
};
use crate::dataset::{Annotation, ImageRecord};
use crate::error::{Error, Result};
use crate::geometry::BBox;

pub const MIN_SCALE: f64 = 0.5;
pub const MAX_SCALE: f64 = 2.0;

/// Clips a mapped box to `frame`. Boxes that lose part of their extent are
/// kept only if enough of them remains.
fn retain(mapped: &BBox, frame: &BBox) -> Option<BBox> {
    let clipped = mapped.intersect(frame)?;
    if clipped == *mapped {
        return Some(clipped);
    }
    let keep = clipped.area() >= MIN_RETAINED_AREA * mapped.area()
        && clipped.width() >= MIN_BOX_SIDE
        && clipped.height() >= MIN_BOX_SIDE;
    keep.then_some(clipped)
}

fn full_frame(width: u32, height: u32) -> BBox {
    BBox::new(0.0, 0.0, width as f64, height as f64).expect("image sizes are positive")
}

/// Mirrors the image left-right.
pub fn hflip(r: &ImageRecord) -> Result<(ImageRecord, TransformRecord)> {
    let px = r.require_pixels()?;
    let rec = TransformRecord::new(Transform::Hflip, r.width, r.height);
    let anns = map_exact(r, &rec)?;
    Ok((r.derive(imageops::flip_horizontal(px), anns), rec))
}

/// Mirrors the image top-bottom.
pub fn vflip(r: &ImageRecord) -> Result<(ImageRecord, TransformRecord)> {
    let px = r.require_pixels()?;
    let rec = TransformRecord::new(Transform::Vflip, r.width, r.height);
    let anns = map_exact(r, &rec)?;
    Ok((r.derive(imageops::flip_vertical(px), anns), rec))
}

/// Maps annotations through a transform that keeps every box inside the frame.
fn map_exact(r: &ImageRecord, rec: &TransformRecord) -> Result<Vec<Annotation>> {
    r.annotations
        .iter()
        .map(|a| {
            let b = rec
                .forward_box(&a.bbox)?
                .expect("flips and translations preserve box extent");
            Ok(Annotation::new(b, a.label))
        })
        .collect()
}

/// Zooms about the image center, keeping the output size.
///
/// Factors above 1 enlarge and crop; factors below 1 shrink and pad with
/// gray. Boxes are mapped by the same affine map, clipped to the frame, and
/// dropped when too little of them remains.
pub fn scale(r: &ImageRecord, factor: f64) -> Result<(ImageRecord, TransformRecord)> {
    if !(MIN_SCALE..=MAX_SCALE).contains(&factor) {
        return Err(Error::validation(format!(
            "scale factor {factor} outside [{MIN_SCALE}, {MAX_SCALE}]"
        )));
    }
    let px = r.require_pixels()?;
    let rec = TransformRecord::new(Transform::Scale { factor }, r.width, r.height);
    if factor == 1.0 {
        return Ok((r.clone(), rec));
    }
    let (w, h) = (r.width as f64, r.height as f64);
    let (cx, cy) = (w / 2.0, h / 2.0);
    let out = RgbImage::from_fn(r.width, r.height, |i, j| {
        let sx = (i as f64 + 0.5 - cx) / factor + cx;
        let sy = (j as f64 + 0.5 - cy) / factor + cy;
        if sx < 0.0 || sy < 0.0 || sx >= w || sy >= h {
            Rgb([PAD_VALUE; 3])
        } else {
            bilinear(px, sx, sy)
        }
    });
    let frame = full_frame(r.width, r.height);
    let mut anns = Vec::with_capacity(r.annotations.len());
    for a in &r.annotations {
        if let Some(b) = rec.forward_box(&a.bbox)?.and_then(|m| retain(&m, &frame)) {
            anns.push(Annotation::new(b, a.label));
        }
    }
    Ok((r.derive(out, anns), rec))
}

/// Randomly crops while keeping `protected` fully inside the window.
///
/// Each side's margin is drawn uniformly from the whole-pixel slack between
/// the protected region and the image border.
pub fn crop_protecting<R: Rng + ?Sized>(
    r: &ImageRecord,
    protected: &BBox,
    rng: &mut R,
) -> Result<(ImageRecord, TransformRecord)> {
    let px = r.require_pixels()?;
    let (w, h) = (r.width, r.height);
    let left_limit = (protected.x_min().floor().max(0.0) as u32).min(w - 1);
    let top_limit = (protected.y_min().floor().max(0.0) as u32).min(h - 1);
    let right_limit = (protected.x_max().ceil() as u32).clamp(left_limit + 1, w);
    let bottom_limit = (protected.y_max().ceil() as u32).clamp(top_limit + 1, h);

    let x0 = rng.random_range(0..=left_limit);
    let y0 = rng.random_range(0..=top_limit);
    let x1 = rng.random_range(right_limit..=w);
    let y1 = rng.random_range(bottom_limit..=h);
    let (cw, ch) = (x1 - x0, y1 - y0);

    let rec = TransformRecord::new(
        Transform::SafeCrop {
            x: x0,
            y: y0,
            width: cw,
            height: ch,
        },
        w,
        h,
    );
    let cropped = imageops::crop_imm(px, x0, y0, cw, ch).to_image();
    let window = full_frame(cw, ch);
    let mut anns = Vec::with_capacity(r.annotations.len());
    for a in &r.annotations {
        // boxes outside the protected region may be cut; the retention rule applies to them
        if let Some(b) = rec.forward_box(&a.bbox)?.and_then(|m| retain(&m, &window)) {
            anns.push(Annotation::new(b, a.label));
        }
    }
    Ok((r.derive(cropped, anns), rec))
}

/// Random crop that never cuts an annotated box. With no annotations the
/// window is the whole image.
pub fn bbox_safe_crop<R: Rng + ?Sized>(
    r: &ImageRecord,
    rng: &mut R,
) -> Result<(ImageRecord, TransformRecord)> {
    let union = r
        .annotations
        .iter()
        .map(|a| a.bbox)
        .reduce(|a, b| a.union_hull(&b));
    match union {
        Some(u) => crop_protecting(r, &u, rng),
        None => {
            r.require_pixels()?;
            let rec = TransformRecord::new(
                Transform::SafeCrop {
                    x: 0,
                    y: 0,
                    width: r.width,
                    height: r.height,
                },
                r.width,
                r.height,
            );
            Ok((r.clone(), rec))
        }
    }
}

/// Four-image mosaic around a pivot drawn uniformly from the central half of
/// the output in each axis. Output size is that of the first input.
pub fn mosaic<R: Rng + ?Sized>(inputs: [&ImageRecord; 4], rng: &mut R) -> Result<AugmentedRecord> {
    let (w, h) = (inputs[0].width, inputs[0].height);
    let px = rng.random_range(0.25..=0.75) * w as f64;
    let py = rng.random_range(0.25..=0.75) * h as f64;
    mosaic_at(inputs, (px.round() as u32, py.round() as u32))
}

/// Mosaic with an explicit pivot. Quadrants are filled top-left, top-right,
/// bottom-left, bottom-right from `inputs` in order; each input is stretched
/// to fill its quadrant.
pub fn mosaic_at(inputs: [&ImageRecord; 4], pivot: (u32, u32)) -> Result<AugmentedRecord> {
    for r in inputs {
        r.require_pixels()?;
    }
    let (w, h) = (inputs[0].width, inputs[0].height);
    if w < 2 || h < 2 {
        return Err(Error::validation(format!(
            "mosaic output {w}x{h} is too small to split"
        )));
    }
    let (pxv, pyv) = (pivot.0.clamp(1, w - 1), pivot.1.clamp(1, h - 1));
    let quadrants = [
        (0, 0, pxv, pyv),
        (pxv, 0, w - pxv, pyv),
        (0, pyv, pxv, h - pyv),
        (pxv, pyv, w - pxv, h - pyv),
    ];

    let mut canvas = RgbImage::new(w, h);
    let mut anns = Vec::new();
    let mut provenance = Vec::with_capacity(4);
    for (q, (r, &(qx, qy, qw, qh))) in inputs.iter().zip(&quadrants).enumerate() {
        let tile = resize(r.require_pixels()?, qw, qh);
        imageops::replace(&mut canvas, &tile, qx as i64, qy as i64);

        let sx = qw as f64 / r.width as f64;
        let sy = qh as f64 / r.height as f64;
        let frame = BBox::new(qx as f64, qy as f64, (qx + qw) as f64, (qy + qh) as f64)
            .expect("quadrants are non-empty");
        for a in &r.annotations {
            let mapped = a.bbox.affine(sx, qx as f64, sy, qy as f64);
            if let Some(b) = mapped.and_then(|m| retain(&m, &frame)) {
                anns.push(Annotation::new(b, a.label));
            }
        }
        provenance.push(ProvenanceEntry {
            source_image_id: r.image_id.clone(),
            transform: TransformRecord::new(
                Transform::Mosaic {
                    pivot_x: pxv,
                    pivot_y: pyv,
                    quadrant: q as u8,
                },
                r.width,
                r.height,
            ),
        });
    }

    Ok(AugmentedRecord {
        image: inputs[0].derive(canvas, anns),
        provenance,
    })
}
