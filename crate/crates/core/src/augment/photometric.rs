//! Pixel-value transforms. Annotations pass through untouched.

use image::{Rgb, RgbImage};

use super::raster::{map_values, to_u8};
use super::{Transform, TransformRecord};
use crate::dataset::ImageRecord;
use crate::error::{Error, Result};

/// Value subtracted from for 8-bit inversion.
pub const INVERT_CONSTANT: u8 = 255;

fn finish(r: &ImageRecord, pixels: RgbImage, t: Transform) -> (ImageRecord, TransformRecord) {
    (
        r.derive(pixels, r.annotations.clone()),
        TransformRecord::new(t, r.width, r.height),
    )
}

fn check_ksize(ksize: u32) -> Result<()> {
    if ksize == 0 || ksize.is_multiple_of(2) {
        Err(Error::validation(format!(
            "kernel size {ksize} must be odd"
        )))
    } else {
        Ok(())
    }
}

/// `v -> 255 - v` on every channel.
pub fn invert(r: &ImageRecord) -> Result<(ImageRecord, TransformRecord)> {
    invert_with(r, INVERT_CONSTANT)
}

/// `v -> max(constant - v, 0)`. Only `constant = 255` is an involution.
pub fn invert_with(r: &ImageRecord, constant: u8) -> Result<(ImageRecord, TransformRecord)> {
    let px = r.require_pixels()?;
    let out = map_values(px, |_, v| constant.saturating_sub(v));
    Ok(finish(r, out, Transform::Invert { constant }))
}

/// Per channel, `v -> clamp(round(v - mean_c + 128))`.
pub fn mean_normalize(r: &ImageRecord) -> Result<(ImageRecord, TransformRecord)> {
    let px = r.require_pixels()?;
    let n = (px.width() as f64) * (px.height() as f64);
    let mut sums = [0u64; 3];
    for p in px.pixels() {
        for (s, v) in sums.iter_mut().zip(p.0) {
            *s += v as u64;
        }
    }
    let means = sums.map(|s| s as f64 / n);
    let out = map_values(px, |c, v| to_u8(v as f64 - means[c] + 128.0));
    Ok(finish(r, out, Transform::MeanNorm { means }))
}

fn gaussian_kernel(sigma: f64, ksize: u32) -> Vec<f64> {
    let half = (ksize / 2) as f64;
    let raw: Vec<f64> = (0..ksize)
        .map(|i| {
            let d = i as f64 - half;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|k| k / sum).collect()
}

/// Separable Gaussian blur with a normalized `ksize`-tap kernel and
/// replicated edges.
pub fn gaussian_filter(
    r: &ImageRecord,
    sigma: f64,
    ksize: u32,
) -> Result<(ImageRecord, TransformRecord)> {
    check_ksize(ksize)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::validation(format!("sigma {sigma} must be positive")));
    }
    let px = r.require_pixels()?;
    let kernel = gaussian_kernel(sigma, ksize);
    let half = (ksize / 2) as i64;
    let (w, h) = (px.width() as i64, px.height() as i64);

    let mut horiz = vec![[0.0f64; 3]; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0; 3];
            for (k, wt) in kernel.iter().enumerate() {
                let sx = (x + k as i64 - half).clamp(0, w - 1);
                let p = px.get_pixel(sx as u32, y as u32).0;
                for c in 0..3 {
                    acc[c] += wt * p[c] as f64;
                }
            }
            horiz[(y * w + x) as usize] = acc;
        }
    }
    let out = RgbImage::from_fn(px.width(), px.height(), |x, y| {
        let mut acc = [0.0; 3];
        for (k, wt) in kernel.iter().enumerate() {
            let sy = (y as i64 + k as i64 - half).clamp(0, h - 1);
            let p = horiz[(sy * w + x as i64) as usize];
            for c in 0..3 {
                acc[c] += wt * p[c];
            }
        }
        Rgb(acc.map(to_u8))
    });
    Ok(finish(r, out, Transform::Gaussian { sigma, ksize }))
}

fn luma(p: [u8; 3]) -> f64 {
    0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64
}

/// Histogram equalization of the luma channel (BT.601 YCbCr).
///
/// Only Y is remapped; with Cb and Cr held fixed a luma change of `d` adds
/// `d` to each of R, G and B.
pub fn hist_equalize(r: &ImageRecord) -> Result<(ImageRecord, TransformRecord)> {
    let px = r.require_pixels()?;
    let mut hist = [0u64; 256];
    for p in px.pixels() {
        hist[to_u8(luma(p.0)) as usize] += 1;
    }
    let total: u64 = hist.iter().sum();
    let mut cdf = [0u64; 256];
    let mut running = 0;
    for (c, h) in cdf.iter_mut().zip(hist) {
        running += h;
        *c = running;
    }
    let cdf_min = cdf.iter().copied().find(|&c| c > 0).unwrap_or(0);
    let lut: [f64; 256] = std::array::from_fn(|y| {
        if total == cdf_min {
            y as f64
        } else {
            ((cdf[y].saturating_sub(cdf_min)) as f64 * 255.0 / (total - cdf_min) as f64).round()
        }
    });

    let mut out = px.clone();
    for p in out.pixels_mut() {
        let y = to_u8(luma(p.0));
        p.0 = shift_luma(p.0, y as f64, lut[y as usize]);
    }
    Ok(finish(r, out, Transform::HistEq))
}

/// Moves a pixel to luma `target` keeping its chroma, desaturating just
/// enough to stay in gamut. Falls back to grey when rounding would land on a
/// different luma level.
fn shift_luma(p: [u8; 3], y: f64, target: f64) -> [u8; 3] {
    let mut k: f64 = 1.0;
    for v in p {
        let c = v as f64 - y;
        if target + c > 255.0 {
            k = k.min((255.0 - target) / c);
        } else if target + c < 0.0 {
            k = k.min(target / -c);
        }
    }
    let out = p.map(|v| to_u8(target + (v as f64 - y) * k.max(0.0)));
    if to_u8(luma(out)) as f64 == target {
        out
    } else {
        [target as u8; 3]
    }
}

fn rgb_to_hsv(p: [u8; 3]) -> (f64, f64, f64) {
    let [r, g, b] = p.map(|v| v as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    let h = if d == 0.0 {
        0.0
    } else if max == r {
        60.0 * (((g - b) / d).rem_euclid(6.0))
    } else if max == g {
        60.0 * ((b - r) / d + 2.0)
    } else {
        60.0 * ((r - g) / d + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { d / max };
    (h, s, max)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let c = v * s;
    let hp = h.rem_euclid(360.0) / 60.0;
    let x = c * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [(r + m) * 255.0, (g + m) * 255.0, (b + m) * 255.0]
}

#[inline]
fn contrast(v: f64, delta: f64) -> f64 {
    (v - 128.0) * (1.0 + delta) + 128.0
}

/// Rotates hue by `hue_degrees` in HSV, then applies
/// `v -> clamp((v - 128) * (1 + contrast_delta) + 128)`.
pub fn hue_contrast(
    r: &ImageRecord,
    hue_degrees: f64,
    contrast_delta: f64,
) -> Result<(ImageRecord, TransformRecord)> {
    let px = r.require_pixels()?;
    let mut out = px.clone();
    for p in out.pixels_mut() {
        let rgb = if hue_degrees == 0.0 {
            p.0.map(|v| v as f64)
        } else {
            let (h, s, v) = rgb_to_hsv(p.0);
            hsv_to_rgb(h + hue_degrees, s, v)
        };
        p.0 = rgb.map(|v| to_u8(contrast(v, contrast_delta)));
    }
    Ok(finish(
        r,
        out,
        Transform::HueContrast {
            hue: hue_degrees,
            contrast: contrast_delta,
        },
    ))
}

/// Per-channel median over a `ksize x ksize` window with replicated edges.
pub fn median_blur(r: &ImageRecord, ksize: u32) -> Result<(ImageRecord, TransformRecord)> {
    check_ksize(ksize)?;
    let px = r.require_pixels()?;
    let half = (ksize / 2) as i64;
    let (w, h) = (px.width() as i64, px.height() as i64);
    let mut window = Vec::with_capacity((ksize * ksize) as usize);
    let out = RgbImage::from_fn(px.width(), px.height(), |x, y| {
        let mut res = [0u8; 3];
        for (c, slot) in res.iter_mut().enumerate() {
            window.clear();
            for dy in -half..=half {
                for dx in -half..=half {
                    let sx = (x as i64 + dx).clamp(0, w - 1) as u32;
                    let sy = (y as i64 + dy).clamp(0, h - 1) as u32;
                    window.push(px.get_pixel(sx, sy).0[c]);
                }
            }
            let mid = window.len() / 2;
            *slot = *window.select_nth_unstable(mid).1;
        }
        Rgb(res)
    });
    Ok(finish(r, out, Transform::MedianBlur { ksize }))
}

/// `v -> clamp((v - 128) * (1 + contrast_delta) + 128 + brightness)`.
pub fn brightness_contrast(
    r: &ImageRecord,
    brightness: f64,
    contrast_delta: f64,
) -> Result<(ImageRecord, TransformRecord)> {
    let px = r.require_pixels()?;
    let out = map_values(px, |_, v| {
        to_u8(contrast(v as f64, contrast_delta) + brightness)
    });
    Ok(finish(
        r,
        out,
        Transform::BrightnessContrast {
            brightness,
            contrast: contrast_delta,
        },
    ))
}
