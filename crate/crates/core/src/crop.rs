//! Boxes, box expansion and crop/resize transforms with exact coordinate
//! mapping in both directions.
//!
//! Boxes are half-open: `[x0, x1) x [y0, y1)`. Point mapping uses continuous
//! pixel-edge coordinates, so a source box of width `bw` mapped to `tw`
//! target pixels scales every coordinate by `tw / bw` after subtracting the
//! box origin. Raster payloads are resampled with the align-corners=false
//! convention of [`crate::mask::resize_score`].

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{
    largest_component, resize_mask, resize_rgb, resize_score, xor_diff, BinaryMask, Connectivity,
    Pixel, ResizeMode, ScoreMap,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "[usize; 4]", try_from = "[usize; 4]")]
pub struct PixelBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl From<PixelBox> for [usize; 4] {
    fn from(b: PixelBox) -> Self {
        [b.x0, b.y0, b.x1, b.y1]
    }
}

impl TryFrom<[usize; 4]> for PixelBox {
    type Error = Error;

    fn try_from(v: [usize; 4]) -> Result<Self> {
        PixelBox::new(v[0], v[1], v[2], v[3])
    }
}

impl PixelBox {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Result<Self> {
        if x0 >= x1 || y0 >= y1 {
            return Err(Error::DegenerateBox(x0 as i64, y0 as i64, x1 as i64, y1 as i64));
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            x0: 0,
            y0: 0,
            x1: width,
            y1: height,
        }
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn contains(&self, other: &PixelBox) -> bool {
        self.x0 <= other.x0 && self.y0 <= other.y0 && self.x1 >= other.x1 && self.y1 >= other.y1
    }

    pub fn contains_pixel(&self, p: Pixel) -> bool {
        p.x >= self.x0 && p.x < self.x1 && p.y >= self.y0 && p.y < self.y1
    }

    pub fn intersect(&self, other: &PixelBox) -> Option<PixelBox> {
        PixelBox::new(
            self.x0.max(other.x0),
            self.y0.max(other.y0),
            self.x1.min(other.x1),
            self.y1.min(other.y1),
        )
        .ok()
    }

    pub fn within(&self, width: usize, height: usize) -> bool {
        self.x1 <= width && self.y1 <= height
    }

    pub fn to_mask(&self, width: usize, height: usize) -> BinaryMask {
        BinaryMask::from_rect(width, height, self.x0, self.y0, self.x1, self.y1)
    }
}

/// Tight bounding box of the foreground.
pub fn bbox_of(m: &BinaryMask) -> Result<PixelBox> {
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for p in m.pixels() {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x + 1);
        y1 = y1.max(p.y + 1);
    }
    if x0 == usize::MAX {
        return Err(Error::EmptyMaskBbox);
    }
    PixelBox::new(x0, y0, x1, y1)
}

// absorbs representation error in products such as 10 * 1.4
const ROUND_EPS: f64 = 1e-9;

/// Scales `b` about its center by `ratio` in each dimension, rounding
/// outward, then clamps to `[0, width) x [0, height)`.
pub fn expand(b: &PixelBox, ratio: f64, width: usize, height: usize) -> PixelBox {
    debug_assert!(ratio >= 1.0);
    let grow = |lo: usize, hi: usize, limit: usize| {
        let c = (lo + hi) as f64 / 2.0;
        let half = (hi - lo) as f64 * ratio / 2.0;
        let a = ((c - half) + ROUND_EPS).floor().max(0.0) as usize;
        let b = ((c + half) - ROUND_EPS).ceil().min(limit as f64) as usize;
        (a.min(lo.min(limit - 1)), b.max(hi.min(limit)).max(a + 1))
    };
    let (x0, x1) = grow(b.x0, b.x1, width);
    let (y0, y1) = grow(b.y0, b.y1, height);
    PixelBox { x0, y0, x1, y1 }
}

/// Grows the shorter side of `b` to match the longer one, shifting inward at
/// the frame edge; the result is clamped when the frame itself is too small.
pub fn square_pad(b: &PixelBox, width: usize, height: usize) -> PixelBox {
    let side = b.width().max(b.height());
    let fit = |lo: usize, len: usize, limit: usize| {
        let side = side.min(limit);
        let extra = side - len.min(side);
        let mut start = lo.saturating_sub(extra / 2);
        if start + side > limit {
            start = limit - side;
        }
        (start, start + side)
    };
    let (x0, x1) = fit(b.x0, b.width(), width);
    let (y0, y1) = fit(b.y0, b.height(), height);
    PixelBox { x0, y0, x1, y1 }
}

/// Crop-resize / paste-back tuning for one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropConfig {
    pub r_tc: f64,
    pub r_fc: f64,
    pub context_size: usize,
    pub object_size: usize,
    pub detail_size: usize,
    /// Pad crops to squares before resizing, for backends that need it.
    pub square_pad: bool,
}

impl Default for CropConfig {
    fn default() -> Self {
        Self {
            r_tc: 1.4,
            r_fc: 1.4,
            context_size: 1024,
            object_size: 384,
            detail_size: 256,
            square_pad: false,
        }
    }
}

impl CropConfig {
    pub fn validate(&self) -> Result<()> {
        if self.r_tc < 1.0 || self.r_fc < 1.0 {
            return Err(Error::InvalidParameter("expansion ratios must be >= 1".into()));
        }
        if self.context_size == 0 || self.object_size == 0 || self.detail_size == 0 {
            return Err(Error::InvalidParameter("crop sizes must be positive".into()));
        }
        Ok(())
    }
}

/// A source box resampled to a fixed target resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropTransform {
    pub source_box: PixelBox,
    pub target_w: usize,
    pub target_h: usize,
}

impl CropTransform {
    pub fn new(source_box: PixelBox, target_w: usize, target_h: usize) -> Result<Self> {
        if source_box.x0 >= source_box.x1 || source_box.y0 >= source_box.y1 {
            let b = source_box;
            return Err(Error::DegenerateBox(b.x0 as i64, b.y0 as i64, b.x1 as i64, b.y1 as i64));
        }
        if target_w == 0 || target_h == 0 {
            return Err(Error::InvalidDimensions(target_w, target_h));
        }
        Ok(Self {
            source_box,
            target_w,
            target_h,
        })
    }

    fn scale(&self) -> (f64, f64) {
        (
            self.target_w as f64 / self.source_box.width() as f64,
            self.target_h as f64 / self.source_box.height() as f64,
        )
    }

    /// Source (full-image) coordinates to target (crop) coordinates.
    pub fn apply_to_point(&self, x: f64, y: f64) -> (f64, f64) {
        let (sx, sy) = self.scale();
        (
            (x - self.source_box.x0 as f64) * sx,
            (y - self.source_box.y0 as f64) * sy,
        )
    }

    /// Target (crop) coordinates back to source coordinates.
    pub fn invert_point(&self, x: f64, y: f64) -> (f64, f64) {
        let (sx, sy) = self.scale();
        (
            x / sx + self.source_box.x0 as f64,
            y / sy + self.source_box.y0 as f64,
        )
    }

    fn check_source(&self, w: usize, h: usize) -> Result<()> {
        if !self.source_box.within(w, h) {
            return Err(Error::OutOfBounds(format!(
                "crop box {:?} outside {}x{} frame",
                <[usize; 4]>::from(self.source_box),
                w,
                h
            )));
        }
        Ok(())
    }

    pub fn apply_to_mask(&self, m: &BinaryMask) -> Result<BinaryMask> {
        self.check_source(m.width(), m.height())?;
        let b = self.source_box;
        resize_mask(
            &m.crop(b.x0, b.y0, b.x1, b.y1),
            self.target_w,
            self.target_h,
            ResizeMode::Nearest,
        )
    }

    pub fn apply_to_map(&self, s: &ScoreMap, mode: ResizeMode) -> Result<ScoreMap> {
        self.check_source(s.width(), s.height())?;
        let b = self.source_box;
        resize_score(&s.crop(b.x0, b.y0, b.x1, b.y1), self.target_w, self.target_h, mode)
    }

    pub fn apply_to_rgb(&self, img: &RgbImage) -> Result<RgbImage> {
        self.check_source(img.width() as usize, img.height() as usize)?;
        let b = self.source_box;
        let crop = image::imageops::crop_imm(
            img,
            b.x0 as u32,
            b.y0 as u32,
            b.width() as u32,
            b.height() as u32,
        )
        .to_image();
        Ok(resize_rgb(&crop, self.target_w, self.target_h))
    }

    /// Resamples a target-space map back to the source box (bilinear) and
    /// overwrites that region of `full`.
    pub fn paste_map(&self, full: &mut ScoreMap, patch: &ScoreMap) -> Result<()> {
        self.check_source(full.width(), full.height())?;
        if patch.dims() != (self.target_w, self.target_h) {
            return Err(Error::DimensionMismatch(
                patch.width(),
                patch.height(),
                self.target_w,
                self.target_h,
            ));
        }
        let b = self.source_box;
        let back = resize_score(patch, b.width(), b.height(), ResizeMode::Bilinear)?;
        full.paste(&back, b.x0, b.y0);
        Ok(())
    }
}

/// Expanded box around the previous mask plus the new interaction.
///
/// When both are empty the full frame is returned.
pub fn select_target_crop(
    prev_mask: &BinaryMask,
    interaction_extent: &BinaryMask,
    cfg: &CropConfig,
) -> Result<PixelBox> {
    let (w, h) = prev_mask.dims();
    let union = prev_mask.or(interaction_extent)?;
    let b = match bbox_of(&union) {
        Ok(b) => expand(&b, cfg.r_tc, w, h),
        Err(Error::EmptyMaskBbox) => PixelBox::full(w, h),
        Err(e) => return Err(e),
    };
    Ok(if cfg.square_pad { square_pad(&b, w, h) } else { b })
}

/// Expanded box around the connected component of `prev XOR coarse` that
/// contains (or lies nearest to) `click`.
///
/// If the prediction did not change anything, a box of side
/// `min(width, height) / 8` centered on the click is expanded instead.
pub fn select_focus_crop(
    prev_mask: &BinaryMask,
    coarse_pred: &BinaryMask,
    click: Pixel,
    cfg: &CropConfig,
) -> Result<PixelBox> {
    let (w, h) = prev_mask.dims();
    let diff = xor_diff(prev_mask, coarse_pred)?;
    let region = largest_component(&diff, Connectivity::Eight, Some(click));
    let b = match bbox_of(&region) {
        Ok(b) => b,
        Err(_) => click_box(click, (w.min(h) / 8).max(1), w, h),
    };
    let b = expand(&b, cfg.r_fc, w, h);
    Ok(if cfg.square_pad { square_pad(&b, w, h) } else { b })
}

fn click_box(click: Pixel, side: usize, w: usize, h: usize) -> PixelBox {
    let x0 = click.x.saturating_sub(side / 2).min(w.saturating_sub(side));
    let y0 = click.y.saturating_sub(side / 2).min(h.saturating_sub(side));
    PixelBox {
        x0,
        y0,
        x1: (x0 + side).min(w),
        y1: (y0 + side).min(h),
    }
}
