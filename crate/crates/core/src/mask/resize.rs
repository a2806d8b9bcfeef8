use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::{BinaryMask, ScoreMap};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResizeMode {
    Nearest,
    Bilinear,
}

// Sampling follows the align-corners=false convention: destination pixel
// centers map to `(d + 0.5) * src / dst - 0.5` in source pixel-center space.

#[inline]
fn nearest_index(d: usize, src: usize, dst: usize) -> usize {
    (((2 * d + 1) * src) / (2 * dst)).min(src - 1)
}

#[inline]
fn bilinear_coord(d: usize, src: usize, dst: usize) -> (usize, usize, f32) {
    let s = ((d as f64 + 0.5) * src as f64 / dst as f64 - 0.5).clamp(0.0, (src - 1) as f64);
    let i0 = s.floor() as usize;
    let i1 = (i0 + 1).min(src - 1);
    (i0, i1, (s - i0 as f64) as f32)
}

pub fn resize_mask(m: &BinaryMask, w: usize, h: usize, mode: ResizeMode) -> Result<BinaryMask> {
    if mode == ResizeMode::Bilinear {
        return Err(Error::BilinearOnBinary);
    }
    if w == 0 || h == 0 {
        return Err(Error::InvalidDimensions(w, h));
    }
    if (w, h) == m.dims() {
        return Ok(m.clone());
    }
    let xs: Vec<usize> = (0..w).map(|x| nearest_index(x, m.width(), w)).collect();
    Ok(BinaryMask::from_fn(w, h, |x, y| {
        m.get(xs[x], nearest_index(y, m.height(), h))
    }))
}

pub fn resize_score(s: &ScoreMap, w: usize, h: usize, mode: ResizeMode) -> Result<ScoreMap> {
    if w == 0 || h == 0 {
        return Err(Error::InvalidDimensions(w, h));
    }
    if (w, h) == s.dims() {
        return Ok(s.clone());
    }
    let (sw, sh) = s.dims();
    Ok(match mode {
        ResizeMode::Nearest => {
            let xs: Vec<usize> = (0..w).map(|x| nearest_index(x, sw, w)).collect();
            ScoreMap::from_fn(w, h, |x, y| s.get(xs[x], nearest_index(y, sh, h)))
        }
        ResizeMode::Bilinear => {
            let xs: Vec<_> = (0..w).map(|x| bilinear_coord(x, sw, w)).collect();
            ScoreMap::from_fn(w, h, |x, y| {
                let (y0, y1, fy) = bilinear_coord(y, sh, h);
                let (x0, x1, fx) = xs[x];
                let top = s.get(x0, y0) * (1.0 - fx) + s.get(x1, y0) * fx;
                let bot = s.get(x0, y1) * (1.0 - fx) + s.get(x1, y1) * fx;
                top * (1.0 - fy) + bot * fy
            })
        }
    })
}

/// Bilinear resampling of an RGB raster with the same sampling convention.
pub fn resize_rgb(img: &RgbImage, w: usize, h: usize) -> RgbImage {
    let (sw, sh) = (img.width() as usize, img.height() as usize);
    if (sw, sh) == (w, h) {
        return img.clone();
    }
    let xs: Vec<_> = (0..w).map(|x| bilinear_coord(x, sw, w)).collect();
    RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let (y0, y1, fy) = bilinear_coord(y as usize, sh, h);
        let (x0, x1, fx) = xs[x as usize];
        let px = |xx: usize, yy: usize| img.get_pixel(xx as u32, yy as u32).0;
        let (a, b, c, d) = (px(x0, y0), px(x1, y0), px(x0, y1), px(x1, y1));
        let mut out = [0u8; 3];
        for k in 0..3 {
            let top = a[k] as f32 * (1.0 - fx) + b[k] as f32 * fx;
            let bot = c[k] as f32 * (1.0 - fx) + d[k] as f32 * fx;
            out[k] = (top * (1.0 - fy) + bot * fy).round().clamp(0.0, 255.0) as u8;
        }
        image::Rgb(out)
    })
}
