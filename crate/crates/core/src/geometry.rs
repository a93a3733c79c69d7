//! Axis-aligned box arithmetic.
//!
//! Coordinates are continuous pixel positions: a box covering the first pixel of
//! an image is `(0, 0, 1, 1)`. There is no inclusive `+1` convention anywhere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An axis-aligned rectangle in XYXY pixel coordinates with strictly positive area.
///
/// Construction rejects non-finite coordinates and zero or negative extents.
/// Containment in an image (and therefore non-negativity) is checked by the
/// records that own boxes, since intermediate boxes produced while remapping
/// may temporarily lie partly outside any frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        if ![x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite()) {
            return Err(Error::validation(format!(
                "box ({x_min}, {y_min}, {x_max}, {y_max}) has non-finite coordinates"
            )));
        }
        if !(x_min < x_max && y_min < y_max) {
            return Err(Error::validation(format!(
                "box ({x_min}, {y_min}, {x_max}, {y_max}) has zero or negative area"
            )));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    /// Builds a box from a top-left corner plus width and height.
    pub fn from_xywh(x: f64, y: f64, width: f64, height: f64) -> Result<Self> {
        Self::new(x, y, x + width, y + height)
    }

    /// Internal constructor for values already known to be ordered and finite.
    pub(crate) fn from_ordered(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Option<Self> {
        Self::new(x_min, y_min, x_max, y_max).ok()
    }

    #[inline]
    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    #[inline]
    pub fn y_min(&self) -> f64 {
        self.y_min
    }
    #[inline]
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    #[inline]
    pub fn y_max(&self) -> f64 {
        self.y_max
    }
    #[inline]
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }
    #[inline]
    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.x_min + self.x_max) / 2.0,
            (self.y_min + self.y_max) / 2.0,
        )
    }

    /// The overlap rectangle, or `None` when the overlap has zero area
    /// (edge or corner contact included).
    pub fn intersect(&self, other: &BBox) -> Option<BBox> {
        let x_min = self.x_min.max(other.x_min);
        let y_min = self.y_min.max(other.y_min);
        let x_max = self.x_max.min(other.x_max);
        let y_max = self.y_max.min(other.y_max);
        BBox::from_ordered(x_min, y_min, x_max, y_max)
    }

    /// Intersection over union, in `[0, 1]`.
    pub fn iou(&self, other: &BBox) -> f64 {
        match self.intersect(other) {
            None => 0.0,
            Some(inter) => {
                let overlap = inter.area();
                let union = self.area() + other.area() - overlap;
                (overlap / union).clamp(0.0, 1.0)
            }
        }
    }

    /// Intersection with `window`, expressed in window-local coordinates.
    pub fn clip(&self, window: &BBox) -> Option<BBox> {
        self.intersect(window).and_then(|b| {
            BBox::from_ordered(
                b.x_min - window.x_min,
                b.y_min - window.y_min,
                b.x_max - window.x_min,
                b.y_max - window.y_min,
            )
        })
    }

    /// Smallest box containing both.
    pub fn union_hull(&self, other: &BBox) -> BBox {
        BBox {
            x_min: self.x_min.min(other.x_min),
            y_min: self.y_min.min(other.y_min),
            x_max: self.x_max.max(other.x_max),
            y_max: self.y_max.max(other.y_max),
        }
    }

    /// True when the box lies inside `[0, width] x [0, height]`.
    pub fn within(&self, width: f64, height: f64) -> bool {
        self.x_min >= 0.0 && self.y_min >= 0.0 && self.x_max <= width && self.y_max <= height
    }

    /// Applies `x -> x * sx + tx`, `y -> y * sy + ty`. Scales must be positive.
    pub fn affine(&self, sx: f64, tx: f64, sy: f64, ty: f64) -> Option<BBox> {
        BBox::from_ordered(
            self.x_min * sx + tx,
            self.y_min * sy + ty,
            self.x_max * sx + tx,
            self.y_max * sy + ty,
        )
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Option<BBox> {
        BBox::from_ordered(
            self.x_min + dx,
            self.y_min + dy,
            self.x_max + dx,
            self.y_max + dy,
        )
    }

    /// Corners as `[x_min, y_min, x_max, y_max]`.
    pub fn to_array(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    /// `[x, y, width, height]` as used by the submission format.
    pub fn to_xywh(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.width(), self.height()]
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        b.to_array()
    }
}

/// Area of `b`. Free-function form of [`BBox::area`].
pub fn area(b: &BBox) -> f64 {
    b.area()
}

pub fn intersect(a: &BBox, b: &BBox) -> Option<BBox> {
    a.intersect(b)
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    a.iou(b)
}

pub fn clip(b: &BBox, window: &BBox) -> Option<BBox> {
    b.clip(window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb(a: f64, b: f64, c: f64, d: f64) -> BBox {
        BBox::new(a, b, c, d).unwrap()
    }

    #[test]
    fn area_examples() {
        assert_eq!(bb(0.0, 0.0, 10.0, 10.0).area(), 100.0);
        assert_eq!(bb(0.0, 0.0, 1.0, 1.0).area(), 1.0);
        assert_eq!(bb(2.5, 0.0, 7.5, 4.0).area(), 20.0);
    }

    #[test]
    fn rejects_degenerate_and_non_finite() {
        assert!(BBox::new(0.0, 0.0, 0.0, 5.0).is_err());
        assert!(BBox::new(3.0, 0.0, 1.0, 5.0).is_err());
        assert!(BBox::new(0.0, f64::NAN, 1.0, 5.0).is_err());
        assert!(BBox::new(0.0, 0.0, f64::INFINITY, 5.0).is_err());
    }

    #[test]
    fn intersect_examples() {
        let a = bb(0.0, 0.0, 4.0, 4.0);
        assert_eq!(a.intersect(&a), Some(a));
        assert_eq!(
            bb(0.0, 0.0, 1.0, 1.0).intersect(&bb(2.0, 2.0, 3.0, 3.0)),
            None
        );
        assert_eq!(
            bb(0.0, 0.0, 10.0, 10.0).intersect(&bb(5.0, 5.0, 15.0, 15.0)),
            Some(bb(5.0, 5.0, 10.0, 10.0))
        );
        // edge and corner contact
        assert_eq!(
            bb(0.0, 0.0, 1.0, 1.0).intersect(&bb(1.0, 0.0, 2.0, 1.0)),
            None
        );
        assert_eq!(
            bb(0.0, 0.0, 1.0, 1.0).intersect(&bb(1.0, 1.0, 2.0, 2.0)),
            None
        );
    }

    #[test]
    fn iou_examples() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        assert_eq!(a.iou(&a), 1.0);
        assert_eq!(bb(0.0, 0.0, 1.0, 1.0).iou(&bb(2.0, 2.0, 3.0, 3.0)), 0.0);
        let v = a.iou(&bb(5.0, 5.0, 15.0, 15.0));
        assert!((v - 25.0 / 175.0).abs() < 1e-12);
        assert!((v - 0.1428571).abs() < 1e-7);
    }

    #[test]
    fn clip_examples() {
        let window = bb(0.0, 0.0, 10.0, 10.0);
        let inside = bb(2.0, 3.0, 4.0, 5.0);
        assert_eq!(inside.clip(&window), Some(inside));
        assert_eq!(bb(20.0, 20.0, 30.0, 30.0).clip(&window), None);
        assert_eq!(
            bb(-5.0, 0.0, 5.0, 10.0).clip(&window),
            Some(bb(0.0, 0.0, 5.0, 10.0))
        );
        // translation into window-local coordinates
        assert_eq!(
            bb(12.0, 12.0, 14.0, 16.0).clip(&bb(10.0, 10.0, 20.0, 20.0)),
            Some(bb(2.0, 2.0, 4.0, 6.0))
        );
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (0.0..100.0f64, 0.0..100.0f64, 0.01..60.0f64, 0.01..60.0f64)
            .prop_map(|(x, y, w, h)| BBox::new(x, y, x + w, y + h).unwrap())
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
            let ab = a.iou(&b);
            prop_assert_eq!(ab, b.iou(&a));
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(a.iou(&a), 1.0);
        }

        #[test]
        fn intersection_no_larger_than_operands(a in arb_box(), b in arb_box()) {
            if let Some(i) = a.intersect(&b) {
                prop_assert!(i.area() <= a.area().min(b.area()));
            }
        }

        #[test]
        fn clip_lies_within_window(b in arb_box(), w in arb_box()) {
            if let Some(c) = b.clip(&w) {
                prop_assert!(c.x_min() >= 0.0 && c.y_min() >= 0.0);
                prop_assert!(c.x_max() <= w.width() + 1e-9 && c.y_max() <= w.height() + 1e-9);
            }
        }
    }
}
