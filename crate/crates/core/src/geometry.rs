//! Pixel-space geometry over integer, half-open boxes.
//!
//! A pixel `(x, y)` lies in a box iff `x_min <= x < x_max` and
//! `y_min <= y < y_max`. All areas are exact integers; IoU and DSC are a
//! single division of exact integer areas.

use serde::{Deserialize, Serialize};

use crate::annotations::RoiAnnotation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PatchBox {
    pub x_min: i64,
    pub y_min: i64,
    pub x_max: i64,
    pub y_max: i64,
}

impl PatchBox {
    pub fn new(x_min: i64, y_min: i64, x_max: i64, y_max: i64) -> Self {
        debug_assert!(x_min < x_max && y_min < y_max, "empty box");
        PatchBox {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn from_bbox(bbox: [i64; 4]) -> Self {
        PatchBox::new(bbox[0], bbox[1], bbox[2], bbox[3])
    }

    pub fn width(&self) -> i64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> i64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> i64 {
        self.width() * self.height()
    }

    /// Center in doubled coordinates, so it stays integral.
    pub fn center_x2(&self) -> (i64, i64) {
        (self.x_min + self.x_max, self.y_min + self.y_max)
    }

    pub fn center(&self) -> (f64, f64) {
        let (cx, cy) = self.center_x2();
        (cx as f64 / 2.0, cy as f64 / 2.0)
    }
}

/// Fixed-size patch for a feature-map cell, mapped to image space.
///
/// The box has side `patch_size` and is centered on the cell center
/// `((col + 0.5) * width / feature_w, (row + 0.5) * height / feature_h)`,
/// rounded half-up to the pixel grid. A box overhanging the image is
/// translated inside it, never shrunk, unless the image itself is smaller
/// than the patch, in which case it spans that whole dimension.
pub fn resolve_patch_box(
    loc_row: u32,
    loc_col: u32,
    feature_h: u32,
    feature_w: u32,
    image_width: u32,
    image_height: u32,
    patch_size: u32,
) -> PatchBox {
    debug_assert!(loc_row < feature_h && loc_col < feature_w);
    debug_assert!(patch_size >= 1);
    let (x_min, x_max) = place_axis(loc_col, feature_w, image_width, patch_size);
    let (y_min, y_max) = place_axis(loc_row, feature_h, image_height, patch_size);
    PatchBox::new(x_min, y_min, x_max, y_max)
}

fn place_axis(cell: u32, cells: u32, extent: u32, patch: u32) -> (i64, i64) {
    let (cell, cells, extent, patch) = (
        i64::from(cell),
        i64::from(cells),
        i64::from(extent),
        i64::from(patch),
    );
    if patch >= extent {
        return (0, extent);
    }
    // floor(center - patch/2 + 1/2) with center = (2*cell+1)*extent / (2*cells)
    let start = ((2 * cell + 1) * extent - (patch - 1) * cells).div_euclid(2 * cells);
    let start = start.clamp(0, extent - patch);
    (start, start + patch)
}

pub fn contains_point(b: &PatchBox, x: f64, y: f64) -> bool {
    b.x_min as f64 <= x && x < b.x_max as f64 && b.y_min as f64 <= y && y < b.y_max as f64
}

pub fn roi_center(roi: &RoiAnnotation) -> (f64, f64) {
    PatchBox::from_bbox(roi.bbox).center()
}

/// Boxes over one image frame; the region is their union.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSet {
    pub boxes: Vec<PatchBox>,
}

impl RegionSet {
    pub fn new(boxes: Vec<PatchBox>) -> Self {
        RegionSet { boxes }
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Exact area of the union of all boxes.
    pub fn area(&self) -> i64 {
        union_area(&self.boxes)
    }
}

impl FromIterator<PatchBox> for RegionSet {
    fn from_iter<I: IntoIterator<Item = PatchBox>>(iter: I) -> Self {
        RegionSet::new(iter.into_iter().collect())
    }
}

/// Exact union area by sweeping vertical slabs between distinct x edges and
/// merging the y-intervals of the boxes spanning each slab.
pub fn union_area(boxes: &[PatchBox]) -> i64 {
    let mut xs: Vec<i64> = boxes.iter().flat_map(|b| [b.x_min, b.x_max]).collect();
    xs.sort_unstable();
    xs.dedup();
    let mut spans: Vec<(i64, i64)> = Vec::with_capacity(boxes.len());
    let mut total = 0;
    for slab in xs.windows(2) {
        let (x0, x1) = (slab[0], slab[1]);
        spans.clear();
        spans.extend(
            boxes
                .iter()
                .filter(|b| b.x_min <= x0 && b.x_max >= x1)
                .map(|b| (b.y_min, b.y_max)),
        );
        if spans.is_empty() {
            continue;
        }
        spans.sort_unstable();
        let mut covered = 0;
        let (mut lo, mut hi) = spans[0];
        for &(a, b) in &spans[1..] {
            if a > hi {
                covered += hi - lo;
                lo = a;
                hi = b;
            } else {
                hi = hi.max(b);
            }
        }
        covered += hi - lo;
        total += covered * (x1 - x0);
    }
    total
}

/// Exact areas needed by both IoU and DSC.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Overlap {
    pub area_a: i64,
    pub area_b: i64,
    pub intersection: i64,
    pub union: i64,
}

impl Overlap {
    pub fn of(a: &RegionSet, b: &RegionSet) -> Self {
        let area_a = a.area();
        let area_b = b.area();
        let all: Vec<PatchBox> = a.boxes.iter().chain(&b.boxes).copied().collect();
        let union = union_area(&all);
        Overlap {
            area_a,
            area_b,
            intersection: area_a + area_b - union,
            union,
        }
    }

    pub fn iou(&self) -> f64 {
        if self.union == 0 {
            log::debug!("IoU of two empty regions is degenerate; scoring 0");
            return 0.0;
        }
        self.intersection as f64 / self.union as f64
    }

    pub fn dsc(&self) -> f64 {
        let denom = self.area_a + self.area_b;
        if denom == 0 {
            log::debug!("DSC of two empty regions is degenerate; scoring 0");
            return 0.0;
        }
        (2 * self.intersection) as f64 / denom as f64
    }
}

pub fn iou(a: &RegionSet, b: &RegionSet) -> f64 {
    Overlap::of(a, b).iou()
}

pub fn dsc(a: &RegionSet, b: &RegionSet) -> f64 {
    Overlap::of(a, b).dsc()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Pixel-center oracle: the box of side `patch` whose pixel-center mean
    /// is closest to the real center, ties toward the larger start, then
    /// pushed inside the image.
    fn brute_axis(cell: u32, cells: u32, extent: u32, patch: u32) -> (i64, i64) {
        if patch >= extent {
            return (0, extent as i64);
        }
        let center = (cell as f64 + 0.5) * extent as f64 / cells as f64;
        let mut best = (f64::INFINITY, 0i64);
        for start in -(patch as i64)..=(extent as i64) {
            let mid = start as f64 + patch as f64 / 2.0;
            let d = (mid - center).abs();
            if d < best.0 || (d == best.0 && start > best.1) {
                best = (d, start);
            }
        }
        let start = best.1.clamp(0, (extent - patch) as i64);
        (start, start + patch as i64)
    }

    fn b(x0: i64, y0: i64, x1: i64, y1: i64) -> RegionSet {
        RegionSet::new(vec![PatchBox::new(x0, y0, x1, y1)])
    }

    #[test]
    fn single_cell_map_centers_patch() {
        let p = resolve_patch_box(0, 0, 1, 1, 768, 1536, 130);
        assert_eq!(p, PatchBox::new(319, 703, 449, 833));
        assert_eq!(brute_axis(0, 1, 768, 130), (319, 449));
        assert_eq!(brute_axis(0, 1, 1536, 130), (703, 833));
        assert!(contains_point(&p, 384.0, 768.0));
    }

    #[test]
    fn corner_cell_is_translated_inside() {
        // 48 rows x 24 cols over a 768 wide, 1536 tall image: cell (0,0)
        // centers at (16,16), so the raw box starts at -49.
        let p = resolve_patch_box(0, 0, 48, 24, 768, 1536, 130);
        assert_eq!(p, PatchBox::new(0, 0, 130, 130));
        assert_eq!(brute_axis(0, 24, 768, 130), (0, 130));
        assert_eq!(brute_axis(0, 48, 1536, 130), (0, 130));
    }

    #[test]
    fn patch_as_large_as_image() {
        let p = resolve_patch_box(3, 2, 7, 5, 130, 130, 130);
        assert_eq!(p, PatchBox::new(0, 0, 130, 130));
        let p = resolve_patch_box(0, 0, 2, 2, 100, 300, 130);
        assert_eq!(p, PatchBox::new(0, 10, 100, 140));
    }

    #[test]
    fn closed_form_matches_pixel_oracle() {
        for cells in 1..=13u32 {
            for extent in [1u32, 7, 64, 129, 130, 131, 257, 768] {
                for patch in [1u32, 2, 3, 64, 130] {
                    for cell in 0..cells {
                        assert_eq!(
                            place_axis(cell, cells, extent, patch),
                            brute_axis(cell, cells, extent, patch),
                            "cell {cell}/{cells} extent {extent} patch {patch}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn half_open_containment() {
        let p = PatchBox::new(0, 0, 10, 10);
        assert!(contains_point(&p, 5.0, 5.0));
        assert!(!contains_point(&p, 10.0, 5.0));
        assert!(contains_point(&p, 0.0, 0.0));
        assert!(!contains_point(&p, 5.0, -0.5));
    }

    #[test]
    fn roi_centers() {
        let roi = |bbox| RoiAnnotation {
            bbox,
            abnormality_type: "mass".into(),
            descriptors: Default::default(),
            roi_class: 0,
        };
        assert_eq!(roi_center(&roi([0, 0, 10, 10])), (5.0, 5.0));
        assert_eq!(roi_center(&roi([100, 200, 300, 400])), (200.0, 300.0));
        assert_eq!(roi_center(&roi([0, 0, 1, 1])), (0.5, 0.5));
    }

    #[test]
    fn iou_and_dsc_examples() {
        assert_eq!(iou(&b(0, 0, 10, 10), &b(0, 0, 10, 10)), 1.0);
        assert_eq!(dsc(&b(0, 0, 10, 10), &b(0, 0, 10, 10)), 1.0);
        assert_eq!(iou(&b(0, 0, 10, 10), &b(20, 0, 30, 10)), 0.0);
        let o = Overlap::of(&b(0, 0, 10, 10), &b(5, 0, 15, 10));
        assert_eq!((o.intersection, o.union), (50, 150));
        assert!((o.iou() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(o.dsc(), 0.5);
        let i = o.iou();
        assert!((2.0 * i / (1.0 + i) - o.dsc()).abs() < 1e-12);
    }

    #[test]
    fn empty_regions() {
        let empty = RegionSet::default();
        assert_eq!(iou(&empty, &empty), 0.0);
        assert_eq!(dsc(&empty, &empty), 0.0);
        assert_eq!(iou(&empty, &b(0, 0, 3, 3)), 0.0);
        assert_eq!(dsc(&b(0, 0, 3, 3), &empty), 0.0);
    }

    #[test]
    fn union_of_overlapping_and_nested_boxes() {
        let boxes = [
            PatchBox::new(0, 0, 10, 10),
            PatchBox::new(5, 5, 15, 15),
            PatchBox::new(2, 2, 4, 4),
            PatchBox::new(20, 0, 21, 1),
        ];
        assert_eq!(union_area(&boxes), 100 + 100 - 25 + 1);
        assert_eq!(union_area(&[]), 0);
    }
}
