use image::{Rgb, RgbImage};

/// Bilinear sample at continuous position `(x, y)`, where pixel `(i, j)` has
/// its center at `(i + 0.5, j + 0.5)`. Edges are replicated.
pub(crate) fn bilinear(img: &RgbImage, x: f64, y: f64) -> Rgb<u8> {
    let (w, h) = img.dimensions();
    let u = (x - 0.5).clamp(0.0, (w - 1) as f64);
    let v = (y - 0.5).clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (u.floor() as u32, v.floor() as u32);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (u - x0 as f64, v - y0 as f64);
    if fx == 0.0 && fy == 0.0 {
        return *img.get_pixel(x0, y0);
    }
    let p00 = img.get_pixel(x0, y0).0;
    let p10 = img.get_pixel(x1, y0).0;
    let p01 = img.get_pixel(x0, y1).0;
    let p11 = img.get_pixel(x1, y1).0;
    let mut out = [0u8; 3];
    for c in 0..3 {
        let top = p00[c] as f64 * (1.0 - fx) + p10[c] as f64 * fx;
        let bottom = p01[c] as f64 * (1.0 - fx) + p11[c] as f64 * fx;
        out[c] = to_u8(top * (1.0 - fy) + bottom * fy);
    }
    Rgb(out)
}

#[inline]
pub(crate) fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Stretches `src` to fill a `width x height` raster.
pub(crate) fn resize(src: &RgbImage, width: u32, height: u32) -> RgbImage {
    if src.dimensions() == (width, height) {
        return src.clone();
    }
    let sx = src.width() as f64 / width as f64;
    let sy = src.height() as f64 / height as f64;
    RgbImage::from_fn(width, height, |i, j| {
        bilinear(src, (i as f64 + 0.5) * sx, (j as f64 + 0.5) * sy)
    })
}

/// Applies `f` to every channel value.
pub(crate) fn map_values(src: &RgbImage, f: impl Fn(usize, u8) -> u8) -> RgbImage {
    let mut out = src.clone();
    for px in out.pixels_mut() {
        for (c, v) in px.0.iter_mut().enumerate() {
            *v = f(c, *v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_at_centers_is_exact() {
        let img = RgbImage::from_fn(3, 2, |x, y| Rgb([x as u8 * 40, y as u8 * 90, 7]));
        for (x, y, p) in img.enumerate_pixels() {
            assert_eq!(bilinear(&img, x as f64 + 0.5, y as f64 + 0.5), *p);
        }
        // halfway between two pixels averages them
        assert_eq!(bilinear(&img, 1.0, 0.5).0[0], 20);
    }

    #[test]
    fn halving_averages_pairs() {
        let img = RgbImage::from_fn(4, 2, |x, _| Rgb([if x % 2 == 0 { 0 } else { 100 }, 0, 0]));
        let small = resize(&img, 2, 1);
        assert_eq!(small.get_pixel(0, 0).0[0], 50);
        assert_eq!(small.get_pixel(1, 0).0[0], 50);
    }
}
