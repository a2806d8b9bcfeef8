//! Binary masks, score maps and the pixel algebra built on them.
//!
//! Everything here is a pure function over immutable rasters. Masks are
//! stored row-major with one byte per pixel (0 or 1); score maps hold `f32`
//! logits or probabilities.

mod components;
mod distance;
pub mod io;
mod morph;
mod resize;

pub use components::{connected_components, largest_component, Connectivity, RegionLabeling};
pub use distance::{argmax_deepest, distance_transform, squared_distance_transform};
pub use morph::{boundary_band, dilate, erode, morphology, Kernel, MorphOp};
pub use resize::{resize_mask, resize_rgb, resize_score, ResizeMode};

use crate::error::{Error, Result};

/// A pixel position in image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pixel {
    pub x: usize,
    pub y: usize,
}

impl Pixel {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BinaryMask({}x{}, area {})", self.width, self.height, self.count())
    }
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "mask dimensions must be positive");
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        let mut m = Self::new(width, height);
        m.data.fill(1);
        m
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions(width, height));
        }
        if data.len() != width * height || data.iter().any(|&v| v > 1) {
            return Err(Error::InvalidMaskData);
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                m.data[y * width + x] = f(x, y) as u8;
            }
        }
        m
    }

    /// Filled axis-aligned rectangle `[x0, x1) x [y0, y1)`, clipped to the frame.
    pub fn from_rect(width: usize, height: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        Self::from_fn(width, height, |x, y| x >= x0 && x < x1 && y >= y0 && y < y1)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] != 0
    }

    /// Like [`get`](Self::get) but treats out-of-frame coordinates as background.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.data[y as usize * self.width + x as usize] != 0
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v as u8;
    }

    pub fn count(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn contains_pixel(&self, p: Pixel) -> bool {
        p.x < self.width && p.y < self.height
    }

    pub fn same_dims(&self, other: &BinaryMask) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    pub fn pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(move |(i, _)| Pixel::new(i % w, i / w))
    }

    fn zip_with(&self, other: &BinaryMask, f: impl Fn(u8, u8) -> u8) -> Result<BinaryMask> {
        self.same_dims(other)?;
        Ok(BinaryMask {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn and(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn or(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn and_not(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a & (1 - b))
    }

    pub fn not(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| 1 - v).collect(),
        }
    }

    pub fn or_assign(&mut self, other: &BinaryMask) -> Result<()> {
        self.same_dims(other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a |= b;
        }
        Ok(())
    }

    /// Sub-mask `[x0, x1) x [y0, y1)`; the window must lie inside the frame.
    pub fn crop(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> BinaryMask {
        assert!(x0 < x1 && y0 < y1 && x1 <= self.width && y1 <= self.height);
        let w = x1 - x0;
        let mut data = Vec::with_capacity(w * (y1 - y0));
        for y in y0..y1 {
            data.extend_from_slice(&self.data[y * self.width + x0..y * self.width + x1]);
        }
        BinaryMask {
            width: w,
            height: y1 - y0,
            data,
        }
    }

    /// Writes `patch` into this mask with its top-left corner at `(x0, y0)`.
    pub fn paste(&mut self, patch: &BinaryMask, x0: usize, y0: usize) {
        assert!(x0 + patch.width <= self.width && y0 + patch.height <= self.height);
        for y in 0..patch.height {
            let dst = (y0 + y) * self.width + x0;
            self.data[dst..dst + patch.width]
                .copy_from_slice(&patch.data[y * patch.width..(y + 1) * patch.width]);
        }
    }

    /// Logit map that saturates at `+magnitude` on foreground and `-magnitude` on background.
    pub fn to_logits(&self, magnitude: f32) -> ScoreMap {
        ScoreMap {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .map(|&v| if v != 0 { magnitude } else { -magnitude })
                .collect(),
        }
    }
}

/// Per-pixel real-valued map (logits or probabilities).
#[derive(Clone, PartialEq)]
pub struct ScoreMap {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl std::fmt::Debug for ScoreMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ScoreMap({}x{})", self.width, self.height)
    }
}

impl ScoreMap {
    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        assert!(width > 0 && height > 0, "score map dimensions must be positive");
        assert!(value.is_finite());
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions(width, height));
        }
        if data.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "score map data length {} != {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::from_vec(width, height, data).expect("from_fn produced an invalid score map")
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        debug_assert!(v.is_finite());
        self.data[y * self.width + x] = v;
    }

    /// True when every value lies in `[0, 1]`.
    pub fn is_probability(&self) -> bool {
        self.data.iter().all(|v| (0.0..=1.0).contains(v))
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> ScoreMap {
        ScoreMap {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sigmoid(&self) -> ScoreMap {
        self.map(sigmoid)
    }

    /// Foreground where `sigmoid(logit) >= 0.5`, i.e. `logit >= 0`.
    pub fn binarize_logits(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| (v >= 0.0) as u8).collect(),
        }
    }

    pub fn crop(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> ScoreMap {
        assert!(x0 < x1 && y0 < y1 && x1 <= self.width && y1 <= self.height);
        let w = x1 - x0;
        let mut data = Vec::with_capacity(w * (y1 - y0));
        for y in y0..y1 {
            data.extend_from_slice(&self.data[y * self.width + x0..y * self.width + x1]);
        }
        ScoreMap {
            width: w,
            height: y1 - y0,
            data,
        }
    }

    pub fn paste(&mut self, patch: &ScoreMap, x0: usize, y0: usize) {
        assert!(x0 + patch.width <= self.width && y0 + patch.height <= self.height);
        for y in 0..patch.height {
            let dst = (y0 + y) * self.width + x0;
            self.data[dst..dst + patch.width]
                .copy_from_slice(&patch.data[y * patch.width..(y + 1) * patch.width]);
        }
    }
}

#[inline]
pub fn sigmoid(v: f32) -> f32 {
    1.0 / (1.0 + (-v).exp())
}

/// Intersection over union. Two empty masks agree perfectly and score 1.0.
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    a.same_dims(b)?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &q) in a.data.iter().zip(&b.data) {
        inter += (p & q) as usize;
        union += (p | q) as usize;
    }
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

pub fn xor_diff(a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask> {
    a.zip_with(b, |p, q| p ^ q)
}
