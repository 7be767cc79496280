//! Box and run-length mask arithmetic.
//!
//! Boxes are half-open in pixel space, `[left, right) x [top, bottom)`.
//! Masks use COCO-style uncompressed RLE: column-major run lengths that
//! alternate background/foreground and always start with a background run
//! (which may be zero).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in pixel coordinates. Sub-pixel values are allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    left: f64,
    top: f64,
    right: f64,
    bottom: f64,
}

impl BoundingBox {
    pub fn new(left: f64, top: f64, right: f64, bottom: f64) -> Result<Self> {
        let finite = [left, top, right, bottom].iter().all(|v| v.is_finite());
        if !finite || left >= right || top >= bottom {
            return Err(Error::InvalidBox {
                left,
                top,
                right,
                bottom,
            });
        }
        Ok(Self {
            left,
            top,
            right,
            bottom,
        })
    }

    /// Builds a box from centre, aspect ratio (width / height) and height.
    pub fn from_xyah(cx: f64, cy: f64, aspect: f64, height: f64) -> Result<Self> {
        let width = aspect * height;
        Self::new(
            cx - width / 2.0,
            cy - height / 2.0,
            cx + width / 2.0,
            cy + height / 2.0,
        )
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn top(&self) -> f64 {
        self.top
    }

    pub fn right(&self) -> f64 {
        self.right
    }

    pub fn bottom(&self) -> f64 {
        self.bottom
    }

    pub fn width(&self) -> f64 {
        self.right - self.left
    }

    pub fn height(&self) -> f64 {
        self.bottom - self.top
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.left + self.right) / 2.0,
            (self.top + self.bottom) / 2.0,
        )
    }

    /// `(cx, cy, aspect, height)` with aspect = width / height.
    pub fn to_xyah(&self) -> [f64; 4] {
        let (cx, cy) = self.center();
        [cx, cy, self.width() / self.height(), self.height()]
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.left, self.top, self.right, self.bottom]
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Result<Self> {
        Self::new(
            self.left + dx,
            self.top + dy,
            self.right + dx,
            self.bottom + dy,
        )
    }

    fn corners(&self) -> [(f64, f64); 4] {
        [
            (self.left, self.top),
            (self.right, self.top),
            (self.left, self.bottom),
            (self.right, self.bottom),
        ]
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        b.to_array()
    }
}

/// Intersection over union of two boxes; symmetric, 0 when disjoint.
pub fn iou_box(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let w = a.right.min(b.right) - a.left.max(b.left);
    let h = a.bottom.min(b.bottom) - a.top.max(b.top);
    if w <= 0.0 || h <= 0.0 {
        return 0.0;
    }
    let inter = w * h;
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Dense binary image, row-major, used at the ingestion boundary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitmap {
    width: u32,
    height: u32,
    pixels: Vec<bool>,
}

impl Bitmap {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidMask(format!(
                "bitmap dimensions must be positive, got {width}x{height}"
            )));
        }
        Ok(Self {
            width,
            height,
            pixels: vec![false; width as usize * height as usize],
        })
    }

    /// Builds a bitmap from row-major pixels.
    pub fn from_pixels(width: u32, height: u32, pixels: Vec<bool>) -> Result<Self> {
        let mut bm = Self::new(width, height)?;
        if pixels.len() != bm.pixels.len() {
            return Err(Error::InvalidMask(format!(
                "expected {} pixels, got {}",
                bm.pixels.len(),
                pixels.len()
            )));
        }
        bm.pixels = pixels;
        Ok(bm)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.pixels[y as usize * self.width as usize + x as usize] = value;
    }

    pub fn count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p).count()
    }
}

/// Run-length encoded binary mask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RleWire", into = "RleWire")]
pub struct MaskRLE {
    width: u32,
    height: u32,
    counts: Vec<u32>,
}

/// COCO layout: `{"size": [height, width], "counts": [...]}`.
#[derive(Serialize, Deserialize)]
struct RleWire {
    size: [u32; 2],
    counts: Vec<u32>,
}

impl TryFrom<RleWire> for MaskRLE {
    type Error = Error;

    fn try_from(w: RleWire) -> Result<Self> {
        MaskRLE::new(w.size[1], w.size[0], w.counts)
    }
}

impl From<MaskRLE> for RleWire {
    fn from(m: MaskRLE) -> Self {
        RleWire {
            size: [m.height, m.width],
            counts: m.counts,
        }
    }
}

impl MaskRLE {
    pub fn new(width: u32, height: u32, counts: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidMask(format!(
                "mask dimensions must be positive, got {width}x{height}"
            )));
        }
        let total: u64 = counts.iter().map(|&c| u64::from(c)).sum();
        let expected = u64::from(width) * u64::from(height);
        if total != expected {
            return Err(Error::InvalidMask(format!(
                "run lengths sum to {total}, expected {expected}"
            )));
        }
        Ok(Self {
            width,
            height,
            counts,
        })
    }

    /// All-background mask.
    pub fn empty(width: u32, height: u32) -> Result<Self> {
        Self::new(width, height, vec![width * height])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Foreground runs as half-open column-major index ranges.
    pub fn foreground_runs(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        let mut pos = 0u64;
        self.counts.iter().enumerate().filter_map(move |(i, &c)| {
            let start = pos;
            pos += u64::from(c);
            (i % 2 == 1 && c > 0).then_some((start, pos))
        })
    }

    pub fn area(&self) -> u64 {
        self.foreground_runs().map(|(s, e)| e - s).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.area() == 0
    }

    /// Swaps foreground and background.
    pub fn complement(&self) -> Self {
        let counts = match self.counts.first() {
            Some(0) if self.counts.len() > 1 => self.counts[1..].to_vec(),
            _ => std::iter::once(0).chain(self.counts.iter().copied()).collect(),
        };
        Self {
            width: self.width,
            height: self.height,
            counts,
        }
    }

    fn check_same_dims(&self, other: &MaskRLE) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch {
                a_width: self.width,
                a_height: self.height,
                b_width: other.width,
                b_height: other.height,
            });
        }
        Ok(())
    }

    /// Number of pixels set in both masks, walking the runs pairwise.
    pub fn intersection_area(&self, other: &MaskRLE) -> Result<u64> {
        self.check_same_dims(other)?;
        let a: Vec<_> = self.foreground_runs().collect();
        let b: Vec<_> = other.foreground_runs().collect();
        let (mut i, mut j, mut inter) = (0, 0, 0u64);
        while i < a.len() && j < b.len() {
            let lo = a[i].0.max(b[j].0);
            let hi = a[i].1.min(b[j].1);
            if hi > lo {
                inter += hi - lo;
            }
            if a[i].1 < b[j].1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        Ok(inter)
    }
}

/// Mask IoU computed on runs. Two empty masks have IoU 1.
pub fn iou_mask(a: &MaskRLE, b: &MaskRLE) -> Result<f64> {
    let inter = a.intersection_area(b)?;
    let union = a.area() + b.area() - inter;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

pub fn rle_encode(bitmap: &Bitmap) -> MaskRLE {
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u32;
    for x in 0..bitmap.width {
        for y in 0..bitmap.height {
            let v = bitmap.get(x, y);
            if v != current {
                counts.push(run);
                run = 0;
                current = v;
            }
            run += 1;
        }
    }
    counts.push(run);
    MaskRLE {
        width: bitmap.width,
        height: bitmap.height,
        counts,
    }
}

pub fn rle_decode(mask: &MaskRLE) -> Bitmap {
    let mut bm = Bitmap {
        width: mask.width,
        height: mask.height,
        pixels: vec![false; mask.width as usize * mask.height as usize],
    };
    let h = u64::from(mask.height);
    for (start, end) in mask.foreground_runs() {
        for idx in start..end {
            bm.set((idx / h) as u32, (idx % h) as u32, true);
        }
    }
    bm
}

/// Tightest half-open box around the foreground, or `None` for an empty mask.
pub fn mask_to_box(mask: &MaskRLE) -> Option<BoundingBox> {
    let h = u64::from(mask.height);
    let mut extent: Option<(u64, u64, u64, u64)> = None;
    for (start, end) in mask.foreground_runs() {
        let last = end - 1;
        let (x0, x1) = (start / h, last / h);
        // A run crossing a column boundary touches both the last and first row.
        let (y0, y1) = if x0 == x1 {
            (start % h, last % h)
        } else {
            (0, h - 1)
        };
        extent = Some(match extent {
            None => (x0, y0, x1, y1),
            Some((a, b, c, d)) => (a.min(x0), b.min(y0), c.max(x1), d.max(y1)),
        });
    }
    extent.map(|(x0, y0, x1, y1)| BoundingBox {
        left: x0 as f64,
        top: y0 as f64,
        right: (x1 + 1) as f64,
        bottom: (y1 + 1) as f64,
    })
}

/// Global 2-D affine camera motion: `(x, y) -> (a x + b y + tx, c x + d y + ty)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 6]", into = "[f64; 6]")]
pub struct CameraTransform {
    rotation_scale: [[f64; 2]; 2],
    translation: [f64; 2],
}

const MIN_DETERMINANT: f64 = 1e-9;

impl CameraTransform {
    pub fn new(rotation_scale: [[f64; 2]; 2], translation: [f64; 2]) -> Result<Self> {
        let finite = rotation_scale
            .iter()
            .flatten()
            .chain(translation.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("camera transform"));
        }
        let t = Self {
            rotation_scale,
            translation,
        };
        let det = t.determinant();
        if det.abs() <= MIN_DETERMINANT {
            return Err(Error::DegenerateTransform(det));
        }
        Ok(t)
    }

    pub fn identity() -> Self {
        Self {
            rotation_scale: [[1.0, 0.0], [0.0, 1.0]],
            translation: [0.0, 0.0],
        }
    }

    pub fn translation(tx: f64, ty: f64) -> Result<Self> {
        Self::new([[1.0, 0.0], [0.0, 1.0]], [tx, ty])
    }

    /// Counter-clockwise rotation about the origin (in image axes) followed by a shift.
    pub fn rotation(theta: f64, tx: f64, ty: f64) -> Result<Self> {
        let (s, c) = theta.sin_cos();
        Self::new([[c, -s], [s, c]], [tx, ty])
    }

    pub fn rotation_scale(&self) -> [[f64; 2]; 2] {
        self.rotation_scale
    }

    pub fn translation_vector(&self) -> [f64; 2] {
        self.translation
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.rotation_scale;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    /// Isotropic scale factor, `sqrt(|det|)`.
    pub fn scale(&self) -> f64 {
        self.determinant().abs().sqrt()
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }

    pub fn apply_point(&self, x: f64, y: f64) -> (f64, f64) {
        let (lx, ly) = self.apply_linear(x, y);
        (lx + self.translation[0], ly + self.translation[1])
    }

    /// Linear part only, for velocities.
    pub fn apply_linear(&self, x: f64, y: f64) -> (f64, f64) {
        let m = &self.rotation_scale;
        (m[0][0] * x + m[0][1] * y, m[1][0] * x + m[1][1] * y)
    }

    /// `then ∘ self`: apply `self` first.
    pub fn then(&self, then: &CameraTransform) -> CameraTransform {
        let a = &then.rotation_scale;
        let b = &self.rotation_scale;
        let mut m = [[0.0; 2]; 2];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        let (tx, ty) = then.apply_point(self.translation[0], self.translation[1]);
        CameraTransform {
            rotation_scale: m,
            translation: [tx, ty],
        }
    }

    pub fn inverse(&self) -> CameraTransform {
        let m = &self.rotation_scale;
        let det = self.determinant();
        let inv = [
            [m[1][1] / det, -m[0][1] / det],
            [-m[1][0] / det, m[0][0] / det],
        ];
        let t = &self.translation;
        CameraTransform {
            rotation_scale: inv,
            translation: [
                -(inv[0][0] * t[0] + inv[0][1] * t[1]),
                -(inv[1][0] * t[0] + inv[1][1] * t[1]),
            ],
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        let m = &self.rotation_scale;
        [
            m[0][0],
            m[0][1],
            m[1][0],
            m[1][1],
            self.translation[0],
            self.translation[1],
        ]
    }
}

impl Default for CameraTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl TryFrom<[f64; 6]> for CameraTransform {
    type Error = Error;

    fn try_from(v: [f64; 6]) -> Result<Self> {
        Self::new([[v[0], v[1]], [v[2], v[3]]], [v[4], v[5]])
    }
}

impl From<CameraTransform> for [f64; 6] {
    fn from(t: CameraTransform) -> Self {
        t.to_array()
    }
}

/// Maps the four corners through `t` and returns their axis-aligned hull.
pub fn apply_transform(t: &CameraTransform, b: &BoundingBox) -> Result<BoundingBox> {
    if t.is_identity() {
        return Ok(*b);
    }
    let mut xs = [0.0; 4];
    let mut ys = [0.0; 4];
    for (i, (x, y)) in b.corners().into_iter().enumerate() {
        (xs[i], ys[i]) = t.apply_point(x, y);
    }
    let min = |v: &[f64; 4]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64; 4]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    BoundingBox::new(min(&xs), min(&ys), max(&xs), max(&ys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bx(l: f64, t: f64, r: f64, b: f64) -> BoundingBox {
        BoundingBox::new(l, t, r, b).unwrap()
    }

    fn dense_iou(a: &Bitmap, b: &Bitmap) -> f64 {
        let mut inter = 0usize;
        let mut union = 0usize;
        for y in 0..a.height() {
            for x in 0..a.width() {
                let (p, q) = (a.get(x, y), b.get(x, y));
                inter += (p && q) as usize;
                union += (p || q) as usize;
            }
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }

    #[test]
    fn rejects_inverted_boxes() {
        assert!(BoundingBox::new(1.0, 0.0, 1.0, 2.0).is_err());
        assert!(BoundingBox::new(0.0, 3.0, 1.0, 2.0).is_err());
        assert!(BoundingBox::new(f64::NAN, 0.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn iou_box_cases() {
        let a = bx(0.0, 0.0, 1.0, 1.0);
        assert_eq!(iou_box(&a, &a), 1.0);
        assert_eq!(iou_box(&a, &bx(2.0, 2.0, 3.0, 3.0)), 0.0);
        // touching edges do not overlap
        assert_eq!(iou_box(&a, &bx(1.0, 0.0, 2.0, 1.0)), 0.0);
        let shifted = bx(0.5, 0.0, 1.5, 1.0);
        assert!((iou_box(&a, &shifted) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rle_small_cases() {
        let bg = Bitmap::new(2, 2).unwrap();
        assert_eq!(rle_encode(&bg).counts(), &[4]);

        let fg = Bitmap::from_pixels(2, 2, vec![true; 4]).unwrap();
        assert_eq!(rle_encode(&fg).counts(), &[0, 4]);

        // row-major [[0, 1], [1, 0]]: column 0 is (bg, fg), column 1 is (fg, bg)
        let mut checker = Bitmap::new(2, 2).unwrap();
        checker.set(0, 1, true);
        checker.set(1, 0, true);
        let rle = rle_encode(&checker);
        assert_eq!(rle.counts(), &[1, 2, 1]);

        let mut checker = Bitmap::new(2, 2).unwrap();
        checker.set(0, 1, true);
        checker.set(1, 1, true);
        let rle = rle_encode(&checker);
        assert_eq!(rle.counts(), &[1, 1, 1, 1]);
        assert_eq!(rle_decode(&rle), checker);
    }

    #[test]
    fn rle_rejects_bad_counts() {
        assert!(MaskRLE::new(2, 2, vec![1, 2]).is_err());
        assert!(MaskRLE::new(2, 2, vec![5]).is_err());
        assert!(MaskRLE::new(0, 2, vec![]).is_err());
        assert!(MaskRLE::new(2, 2, vec![0, 0, 4]).is_ok());
    }

    #[test]
    fn iou_mask_cases() {
        // 10 pixels in one column of a 1x20 strip vs a 5-pixel subset
        let a = MaskRLE::new(1, 20, vec![0, 10, 10]).unwrap();
        let b = MaskRLE::new(1, 20, vec![2, 5, 13]).unwrap();
        assert_eq!(iou_mask(&a, &b).unwrap(), 0.5);
        assert_eq!(iou_mask(&a, &a).unwrap(), 1.0);
        let c = MaskRLE::new(1, 20, vec![10, 10]).unwrap();
        assert_eq!(iou_mask(&a, &c).unwrap(), 0.0);
        let e = MaskRLE::empty(1, 20).unwrap();
        assert_eq!(iou_mask(&e, &e).unwrap(), 1.0);
        assert_eq!(iou_mask(&e, &a).unwrap(), 0.0);
        let other = MaskRLE::empty(2, 10).unwrap();
        assert!(matches!(
            iou_mask(&a, &other),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn complement_round_trips() {
        let a = MaskRLE::new(2, 3, vec![1, 2, 3]).unwrap();
        let c = a.complement();
        assert_eq!(c.counts(), &[0, 1, 2, 3]);
        assert_eq!(c.complement(), a);
        assert_eq!(a.area() + c.area(), 6);
        let full = MaskRLE::new(2, 2, vec![0, 4]).unwrap();
        assert_eq!(full.complement().counts(), &[4]);
    }

    #[test]
    fn mask_to_box_cases() {
        let mut bm = Bitmap::new(10, 10).unwrap();
        assert!(mask_to_box(&rle_encode(&bm)).is_none());
        bm.set(3, 4, true);
        assert_eq!(mask_to_box(&rle_encode(&bm)).unwrap(), bx(3.0, 4.0, 4.0, 5.0));

        let full = Bitmap::from_pixels(6, 4, vec![true; 24]).unwrap();
        assert_eq!(mask_to_box(&rle_encode(&full)).unwrap(), bx(0.0, 0.0, 6.0, 4.0));

        let mut blobs = Bitmap::new(12, 12).unwrap();
        for (x, y) in [(1, 2), (2, 2), (1, 3), (9, 8), (10, 9)] {
            blobs.set(x, y, true);
        }
        assert_eq!(mask_to_box(&rle_encode(&blobs)).unwrap(), bx(1.0, 2.0, 11.0, 10.0));
    }

    #[test]
    fn transform_cases() {
        let b = bx(10.0, 20.0, 30.0, 60.0);
        assert_eq!(apply_transform(&CameraTransform::identity(), &b).unwrap(), b);
        let t = CameraTransform::translation(10.0, 5.0).unwrap();
        assert_eq!(apply_transform(&t, &b).unwrap(), bx(20.0, 25.0, 40.0, 65.0));

        // (x, y) -> (-y, x): corners (0,0) (1,0) (0,1) (1,1) -> (0,0) (0,1) (-1,0) (-1,1)
        let rot = CameraTransform::new([[0.0, -1.0], [1.0, 0.0]], [0.0, 0.0]).unwrap();
        let hull = apply_transform(&rot, &bx(0.0, 0.0, 1.0, 1.0)).unwrap();
        assert_eq!(hull, bx(-1.0, 0.0, 0.0, 1.0));

        assert!(matches!(
            CameraTransform::new([[1.0, 2.0], [2.0, 4.0]], [0.0, 0.0]),
            Err(Error::DegenerateTransform(_))
        ));
        assert!(serde_json::from_str::<CameraTransform>("[0,0,0,0,1,1]").is_err());
    }

    #[test]
    fn transform_inverse_and_compose() {
        let t = CameraTransform::new([[1.2, -0.3], [0.4, 0.9]], [5.0, -2.0]).unwrap();
        let id = t.then(&t.inverse());
        let (x, y) = id.apply_point(13.0, -7.0);
        assert!((x - 13.0).abs() < 1e-12 && (y + 7.0).abs() < 1e-12);
    }

    fn arb_bitmap(max: u32) -> impl Strategy<Value = Bitmap> {
        (1..=max, 1..=max).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<bool>(), (w * h) as usize)
                .prop_map(move |px| Bitmap::from_pixels(w, h, px).unwrap())
        })
    }

    fn arb_box() -> impl Strategy<Value = BoundingBox> {
        (-100.0..100.0f64, -100.0..100.0f64, 0.1..50.0f64, 0.1..50.0f64)
            .prop_map(|(l, t, w, h)| BoundingBox::new(l, t, l + w, t + h).unwrap())
    }

    proptest! {
        #[test]
        fn rle_round_trip(bm in arb_bitmap(128)) {
            let rle = rle_encode(&bm);
            prop_assert_eq!(rle.area() as usize, bm.count());
            prop_assert_eq!(rle_decode(&rle), bm);
        }

        #[test]
        fn iou_mask_matches_dense_oracle(
            (a, b) in (1..=64u32, 1..=64u32).prop_flat_map(|(w, h)| {
                let n = (w * h) as usize;
                (
                    proptest::collection::vec(any::<bool>(), n),
                    proptest::collection::vec(any::<bool>(), n),
                ).prop_map(move |(p, q)| {
                    (Bitmap::from_pixels(w, h, p).unwrap(), Bitmap::from_pixels(w, h, q).unwrap())
                })
            })
        ) {
            let got = iou_mask(&rle_encode(&a), &rle_encode(&b)).unwrap();
            prop_assert_eq!(got, dense_iou(&a, &b));
        }

        #[test]
        fn iou_box_symmetric(a in arb_box(), b in arb_box()) {
            prop_assert_eq!(iou_box(&a, &b), iou_box(&b, &a));
            prop_assert_eq!(iou_box(&a, &a), 1.0);
            let v = iou_box(&a, &b);
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn translations_compose(
            b in arb_box(),
            t1 in (-50.0..50.0f64, -50.0..50.0f64),
            t2 in (-50.0..50.0f64, -50.0..50.0f64),
        ) {
            let a = CameraTransform::translation(t1.0, t1.1).unwrap();
            let c = CameraTransform::translation(t2.0, t2.1).unwrap();
            let stepwise = apply_transform(&c, &apply_transform(&a, &b).unwrap()).unwrap();
            let direct = apply_transform(
                &CameraTransform::translation(t1.0 + t2.0, t1.1 + t2.1).unwrap(), &b).unwrap();
            for (p, q) in stepwise.to_array().iter().zip(direct.to_array()) {
                prop_assert!((p - q).abs() < 1e-9);
            }
        }

        #[test]
        fn mask_box_contains_all_pixels(bm in arb_bitmap(32)) {
            let rle = rle_encode(&bm);
            match mask_to_box(&rle) {
                None => prop_assert_eq!(bm.count(), 0),
                Some(b) => {
                    let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
                    for y in 0..bm.height() {
                        for x in 0..bm.width() {
                            if bm.get(x, y) {
                                x0 = x0.min(x); y0 = y0.min(y);
                                x1 = x1.max(x + 1); y1 = y1.max(y + 1);
                            }
                        }
                    }
                    prop_assert_eq!(b.to_array(), [x0 as f64, y0 as f64, x1 as f64, y1 as f64]);
                }
            }
        }
    }
}
