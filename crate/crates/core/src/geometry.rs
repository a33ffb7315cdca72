//! Axis-aligned boxes in continuous pixel coordinates, IoU, search-region
//! enlargement and closest-object assignment.

use serde::{Deserialize, Serialize};

/// Axis-aligned rectangle in continuous pixel coordinates.
///
/// `(x1, y1)` is the top-left corner, `(x2, y2)` the bottom-right.
/// Invariant: `x1 <= x2` and `y1 <= y2` (zero-area boxes are allowed).
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        assert!(
            x1 <= x2 && y1 <= y2,
            "invalid box corners: ({x1}, {y1}) .. ({x2}, {y2})"
        );
        BBox { x1, y1, x2, y2 }
    }

    /// Build from a corner plus width/height (the annotation-file convention).
    pub fn from_xywh(x: f64, y: f64, w: f64, h: f64) -> Self {
        BBox::new(x, y, x + w, y + h)
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    /// True when `other` lies fully inside `self` (boundaries included).
    pub fn contains(&self, other: &BBox) -> bool {
        self.x1 <= other.x1 && self.y1 <= other.y1 && self.x2 >= other.x2 && self.y2 >= other.y2
    }

    /// Intersection rectangle, or `None` when the boxes do not overlap at all.
    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let x1 = self.x1.max(other.x1);
        let y1 = self.y1.max(other.y1);
        let x2 = self.x2.min(other.x2);
        let y2 = self.y2.min(other.y2);
        if x1 <= x2 && y1 <= y2 {
            Some(BBox { x1, y1, x2, y2 })
        } else {
            None
        }
    }

    /// Area of the intersection with `other` (0 when disjoint).
    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = (self.x2.min(other.x2) - self.x1.max(other.x1)).max(0.0);
        let h = (self.y2.min(other.y2) - self.y1.max(other.y1)).max(0.0);
        w * h
    }

    /// Clip to the image extent.
    pub fn clip(&self, extent: ImageExtent) -> BBox {
        let w = extent.width as f64;
        let h = extent.height as f64;
        BBox {
            x1: self.x1.clamp(0.0, w),
            y1: self.y1.clamp(0.0, h),
            x2: self.x2.clamp(0.0, w),
            y2: self.y2.clamp(0.0, h),
        }
    }
}

/// Pixel dimensions of an image; both sides are positive.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageExtent {
    pub width: u32,
    pub height: u32,
}

impl ImageExtent {
    pub fn new(width: u32, height: u32) -> Self {
        assert!(width > 0 && height > 0, "extent sides must be positive");
        ImageExtent { width, height }
    }

    /// The whole image as a box.
    pub fn as_bbox(&self) -> BBox {
        BBox::new(0.0, 0.0, self.width as f64, self.height as f64)
    }
}

/// Intersection over union of two boxes.
///
/// Defined as 0 whenever the union area is 0, which avoids 0/0 for
/// degenerate boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Scale a box about its center by `gamma >= 1` and clip the result to the
/// image extent. This is the search region the refinement modules look at.
pub fn enlarge(b: &BBox, gamma: f64, extent: ImageExtent) -> BBox {
    assert!(gamma >= 1.0, "enlargement factor must be >= 1, got {gamma}");
    let (cx, cy) = b.center();
    let hw = b.width() * gamma / 2.0;
    let hh = b.height() * gamma / 2.0;
    BBox {
        x1: cx - hw,
        y1: cy - hh,
        x2: cx + hw,
        y2: cy + hh,
    }
    .clip(extent)
}

/// Index of the ground-truth box closest to `b`.
///
/// Closest means highest IoU; when every IoU is exactly 0 the box with the
/// smallest center-to-center distance wins instead. Ties go to the lowest
/// index. Returns `None` for an empty list.
pub fn closest_object(b: &BBox, gts: &[BBox]) -> Option<usize> {
    if gts.is_empty() {
        return None;
    }
    let mut best_idx = 0;
    let mut best_iou = iou(b, &gts[0]);
    for (i, gt) in gts.iter().enumerate().skip(1) {
        let v = iou(b, gt);
        if v > best_iou {
            best_iou = v;
            best_idx = i;
        }
    }
    if best_iou > 0.0 {
        return Some(best_idx);
    }
    // No overlap anywhere: fall back to center distance.
    let (bx, by) = b.center();
    let dist2 = |g: &BBox| {
        let (gx, gy) = g.center();
        (gx - bx) * (gx - bx) + (gy - by) * (gy - by)
    };
    let mut best_idx = 0;
    let mut best_d = dist2(&gts[0]);
    for (i, gt) in gts.iter().enumerate().skip(1) {
        let d = dist2(gt);
        if d < best_d {
            best_d = d;
            best_idx = i;
        }
    }
    Some(best_idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn iou_identity() {
        let a = BBox::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
    }

    #[test]
    fn iou_disjoint() {
        let a = BBox::new(0.0, 0.0, 10.0, 10.0);
        let b = BBox::new(20.0, 20.0, 30.0, 30.0);
        assert_eq!(iou(&a, &b), 0.0);
    }

    #[test]
    fn iou_half_overlap() {
        // intersection 50, union 150
        let a = BBox::new(0.0, 0.0, 10.0, 10.0);
        let b = BBox::new(5.0, 0.0, 15.0, 10.0);
        assert!((iou(&a, &b) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn iou_zero_union_is_zero() {
        let a = BBox::new(3.0, 3.0, 3.0, 3.0);
        assert_eq!(iou(&a, &a), 0.0);
    }

    #[test]
    fn enlarge_scales_about_center() {
        let b = BBox::new(10.0, 10.0, 20.0, 20.0);
        let e = enlarge(&b, 2.0, ImageExtent::new(100, 100));
        assert_eq!(e, BBox::new(5.0, 5.0, 25.0, 25.0));
    }

    #[test]
    fn enlarge_clips_at_origin() {
        let b = BBox::new(0.0, 0.0, 20.0, 20.0);
        let e = enlarge(&b, 2.0, ImageExtent::new(100, 100));
        assert_eq!(e, BBox::new(0.0, 0.0, 30.0, 30.0));
    }

    #[test]
    fn enlarge_identity_at_one() {
        let b = BBox::new(4.0, 6.0, 44.0, 30.0);
        let extent = ImageExtent::new(50, 50);
        assert_eq!(enlarge(&b, 1.0, extent), b.clip(extent));
    }

    #[test]
    #[should_panic]
    fn enlarge_rejects_shrink_factor() {
        enlarge(&BBox::new(0.0, 0.0, 1.0, 1.0), 0.5, ImageExtent::new(10, 10));
    }

    #[test]
    fn closest_object_prefers_exact_match() {
        let gts = vec![
            BBox::new(0.0, 0.0, 5.0, 5.0),
            BBox::new(10.0, 0.0, 15.0, 5.0),
            BBox::new(0.0, 10.0, 5.0, 15.0),
            BBox::new(20.0, 20.0, 30.0, 30.0),
        ];
        assert_eq!(closest_object(&gts[3], &gts), Some(3));
    }

    #[test]
    fn closest_object_distance_fallback() {
        let b = BBox::new(50.0, 50.0, 55.0, 55.0);
        let gts = vec![
            BBox::new(0.0, 0.0, 5.0, 5.0),
            BBox::new(60.0, 60.0, 65.0, 65.0),
        ];
        // Disjoint from both; gts[1] has the nearer center.
        assert_eq!(closest_object(&b, &gts), Some(1));
    }

    #[test]
    fn closest_object_empty() {
        assert_eq!(closest_object(&BBox::new(0.0, 0.0, 1.0, 1.0), &[]), None);
    }

    #[test]
    fn closest_object_tie_breaks_low_index() {
        let b = BBox::new(0.0, 0.0, 10.0, 10.0);
        let g = BBox::new(2.0, 2.0, 8.0, 8.0);
        assert_eq!(closest_object(&b, &[g, g]), Some(0));
    }

    fn arb_bbox() -> impl Strategy<Value = BBox> {
        (0.0..100.0f64, 0.0..100.0f64, 0.0..100.0f64, 0.0..100.0f64).prop_map(|(a, b, c, d)| {
            BBox::new(a.min(c), b.min(d), a.max(c), b.max(d))
        })
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_bbox(), b in arb_bbox()) {
            let ab = iou(&a, &b);
            let ba = iou(&b, &a);
            prop_assert_eq!(ab, ba);
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn iou_self_is_one_for_positive_area(a in arb_bbox()) {
            prop_assume!(a.area() > 0.0);
            prop_assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn enlarge_contains_and_monotone(a in arb_bbox(), g1 in 1.0..3.0f64, g2 in 0.0..2.0f64) {
            // Far-away bounds emulate an unbounded image.
            let extent = ImageExtent::new(1_000_000, 1_000_000);
            let shifted = BBox::new(a.x1 + 500.0, a.y1 + 500.0, a.x2 + 500.0, a.y2 + 500.0);
            let lo = enlarge(&shifted, g1, extent);
            let hi = enlarge(&shifted, g1 + g2, extent);
            prop_assert!(lo.contains(&shifted.clip(extent)));
            prop_assert!(hi.contains(&lo));
        }
    }
}
