//! Synthetic fixtures for the criterion benches.

use image::{Rgb, RgbImage};
use paveval_core::dataset::Predictions;
use paveval_core::{Annotation, BBox, Dataset, Detection, DistressClass, ImageRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_box(r: &mut ChaCha8Rng, w: f64, h: f64) -> BBox {
    let bw = r.random_range(4.0..w / 3.0);
    let bh = r.random_range(4.0..h / 3.0);
    let x = r.random_range(0.0..w - bw);
    let y = r.random_range(0.0..h - bh);
    BBox::new(x, y, x + bw, y + bh).unwrap()
}

/// `images` annotated records of `width`x`height`, `boxes` boxes each.
pub fn dataset(
    seed: u64,
    images: usize,
    boxes: usize,
    width: u32,
    height: u32,
    pixels: bool,
) -> Dataset {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..images)
        .map(|i| {
            let anns = (0..boxes)
                .map(|_| {
                    let label = DistressClass::ALL[r.random_range(0..7)];
                    Annotation::new(random_box(&mut r, width as f64, height as f64), label)
                })
                .collect();
            let id = format!("img{i:05}");
            if pixels {
                let px = RgbImage::from_fn(width, height, |x, y| {
                    Rgb([(x * 3 + y) as u8, (y * 5) as u8, (x ^ y) as u8])
                });
                ImageRecord::with_pixels(id, px, anns).unwrap()
            } else {
                ImageRecord::new(id, width, height, anns).unwrap()
            }
        })
        .collect();
    Dataset::new(records).unwrap()
}

/// Ground-truth boxes jittered by up to `jitter` px, plus `extra` false
/// positives per image, with random confidences.
pub fn noisy_predictions(gt: &Dataset, seed: u64, jitter: f64, extra: usize) -> Predictions {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Predictions::new();
    for rec in gt {
        let (w, h) = (rec.width as f64, rec.height as f64);
        let mut dets: Vec<Detection> = rec
            .annotations
            .iter()
            .map(|a| {
                let [x0, y0, x1, y1] = a.bbox.to_array();
                let dx = r.random_range(-jitter..=jitter);
                let dy = r.random_range(-jitter..=jitter);
                let b = BBox::new(x0 + dx, y0 + dy, x1 + dx, y1 + dy).unwrap();
                Detection::new(b, a.label, r.random()).unwrap()
            })
            .collect();
        for _ in 0..extra {
            let label = DistressClass::ALL[r.random_range(0..7)];
            dets.push(Detection::new(random_box(&mut r, w, h), label, r.random()).unwrap());
        }
        out.insert(rec.image_id.clone(), dets);
    }
    out
}

/// A dense cluster of overlapping detections, as a detector emits before NMS.
pub fn crowded_detections(seed: u64, n: usize) -> Vec<Detection> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let label = DistressClass::ALL[r.random_range(0..3)];
            Detection::new(random_box(&mut r, 320.0, 320.0), label, r.random()).unwrap()
        })
        .collect()
}
