//! Constructed fixtures: flat two-tone images of simple shapes, where the
//! ground truth is known exactly.

use image::{Rgb, RgbImage};
use rand::Rng as _;

use super::dataset::Sample;
use crate::mask::BinaryMask;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64 },
    /// Half-open pixel rectangle.
    Rect { x0: usize, y0: usize, x1: usize, y1: usize },
}

impl Shape {
    pub fn mask(&self, width: usize, height: usize) -> BinaryMask {
        match *self {
            Shape::Ellipse { cx, cy, rx, ry } => BinaryMask::from_fn(width, height, |x, y| {
                let dx = (x as f64 - cx) / rx;
                let dy = (y as f64 - cy) / ry;
                dx * dx + dy * dy <= 1.0
            }),
            Shape::Rect { x0, y0, x1, y1 } => BinaryMask::from_rect(width, height, x0, y0, x1, y1),
        }
    }
}

/// Paints `fg` where the mask is set and `bg` elsewhere.
pub fn two_tone(gt: &BinaryMask, fg: [u8; 3], bg: [u8; 3]) -> RgbImage {
    RgbImage::from_fn(gt.width() as u32, gt.height() as u32, |x, y| {
        if gt.get(x as usize, y as usize) {
            Rgb(fg)
        } else {
            Rgb(bg)
        }
    })
}

const PALETTE: [[u8; 3]; 6] = [
    [220, 40, 40],
    [30, 60, 200],
    [40, 170, 60],
    [235, 200, 40],
    [20, 20, 20],
    [240, 240, 240],
];

/// A random ellipse or rectangle covering a sizeable part of the frame,
/// kept at least two pixels away from the border.
pub fn random_shape(rng: &mut rng::Rng, width: usize, height: usize) -> Shape {
    let (w, h) = (width as f64, height as f64);
    if rng.random_bool(0.5) {
        let rx = rng.random_range(0.16..0.35) * w;
        let ry = rng.random_range(0.16..0.35) * h;
        let cx = rng.random_range(rx + 2.0..w - rx - 2.0);
        let cy = rng.random_range(ry + 2.0..h - ry - 2.0);
        Shape::Ellipse { cx, cy, rx, ry }
    } else {
        let bw = rng.random_range(width * 3 / 10..=width * 6 / 10);
        let bh = rng.random_range(height * 3 / 10..=height * 6 / 10);
        let x0 = rng.random_range(2..=width - bw - 2);
        let y0 = rng.random_range(2..=height - bh - 2);
        Shape::Rect {
            x0,
            y0,
            x1: x0 + bw,
            y1: y0 + bh,
        }
    }
}

/// A two-tone sample with a random shape and two distinct palette colors.
pub fn two_tone_sample(id: &str, width: usize, height: usize, seed: u64) -> Sample {
    let mut r = rng::seeded(rng::derive(seed, id));
    let shape = random_shape(&mut r, width, height);
    let fg = r.random_range(0..PALETTE.len());
    let bg = (fg + r.random_range(1..PALETTE.len())) % PALETTE.len();
    let gt = shape.mask(width, height);
    Sample::new(id, two_tone(&gt, PALETTE[fg], PALETTE[bg]), gt)
}

/// `n` two-tone samples with ids `syn-000`, `syn-001`, ...
pub fn synthetic_samples(n: usize, width: usize, height: usize, seed: u64) -> Vec<Sample> {
    (0..n)
        .map(|i| two_tone_sample(&format!("syn-{i:03}"), width, height, seed))
        .collect()
}
