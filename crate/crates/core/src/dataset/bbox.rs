use serde::{Deserialize, Serialize};

use super::{DatasetError, Result};

/// Axis-aligned integer box in pixel coordinates, `(x, y)` being the
/// top-left corner. Serialized as `[x, y, w, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[i64; 4]", into = "[i64; 4]")]
pub struct BBox {
    pub x: i64,
    pub y: i64,
    pub w: u32,
    pub h: u32,
}

impl BBox {
    pub fn new(x: i64, y: i64, w: i64, h: i64) -> Result<Self> {
        if w <= 0 || h <= 0 || w > u32::MAX as i64 || h > u32::MAX as i64 {
            return Err(DatasetError::InvalidBox([x, y, w, h]));
        }
        Ok(Self {
            x,
            y,
            w: w as u32,
            h: h as u32,
        })
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    /// Exclusive right edge.
    pub fn right(&self) -> i64 {
        self.x + self.w as i64
    }

    /// Exclusive bottom edge.
    pub fn bottom(&self) -> i64 {
        self.y + self.h as i64
    }

    pub fn contains(&self, other: &BBox) -> bool {
        self.x <= other.x
            && self.y <= other.y
            && self.right() >= other.right()
            && self.bottom() >= other.bottom()
    }

    pub fn within_image(&self, img_w: u32, img_h: u32) -> bool {
        self.x >= 0 && self.y >= 0 && self.right() <= img_w as i64 && self.bottom() <= img_h as i64
    }
}

impl TryFrom<[i64; 4]> for BBox {
    type Error = DatasetError;

    fn try_from(v: [i64; 4]) -> Result<Self> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [i64; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w as i64, b.h as i64]
    }
}

/// Intersection over union of two boxes; 0 for disjoint boxes.
pub fn compute_iou(a: &BBox, b: &BBox) -> f64 {
    let ix = (a.right().min(b.right()) - a.x.max(b.x)).max(0) as u64;
    let iy = (a.bottom().min(b.bottom()) - a.y.max(b.y)).max(0) as u64;
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

/// Grows every side of `b` by `border` pixels and clamps the result to the
/// image extent `[0, img_w) x [0, img_h)`.
pub fn expand_bbox(b: &BBox, border: u32, img_w: u32, img_h: u32) -> Result<BBox> {
    if !b.within_image(img_w, img_h) {
        return Err(DatasetError::OutsideImage {
            bbox: *b,
            img_w,
            img_h,
        });
    }
    let border = border as i64;
    let x0 = (b.x - border).max(0);
    let y0 = (b.y - border).max(0);
    let x1 = (b.right() + border).min(img_w as i64);
    let y1 = (b.bottom() + border).min(img_h as i64);
    BBox::new(x0, y0, x1 - x0, y1 - y0).map_err(|_| DatasetError::DegenerateCrop { img_w, img_h })
}
