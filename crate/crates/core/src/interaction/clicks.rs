//! Click and box simulation.

use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Click, Polarity};
use crate::crop::{bbox_of, PixelBox};
use crate::error::{Error, Result};
use crate::mask::{
    argmax_deepest, dilate, largest_component, xor_diff, BinaryMask, Connectivity, Kernel, Pixel,
};
use crate::rng::{self, Rng};

/// Deterministic evaluation click.
///
/// Takes the largest 8-connected component of the error region and returns
/// its deepest pixel (distance-transform argmax, ties to the smallest
/// `(y, x)`). The click is positive when that pixel is foreground in `gt`.
pub fn eval_click(gt: &BinaryMask, pred: &BinaryMask) -> Result<Click> {
    let err = xor_diff(gt, pred)?;
    if err.is_empty() {
        return Err(Error::AlreadyPerfect);
    }
    let region = largest_component(&err, Connectivity::Eight, None);
    let p = argmax_deepest(&region).expect("non-empty region has a deepest pixel");
    let polarity = if gt.get(p.x, p.y) {
        Polarity::Positive
    } else {
        Polarity::Negative
    };
    Ok(Click::new(p.x, p.y, polarity))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingClickConfig {
    pub max_positive: usize,
    pub max_negative: usize,
    pub decay: f64,
    /// Width of the background band negatives are drawn from.
    pub negative_band: usize,
}

impl Default for TrainingClickConfig {
    fn default() -> Self {
        Self {
            max_positive: 24,
            max_negative: 24,
            decay: 0.8,
            negative_band: 15,
        }
    }
}

impl TrainingClickConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.decay) {
            return Err(Error::InvalidParameter(format!(
                "click decay {} outside [0, 1]",
                self.decay
            )));
        }
        if self.max_positive == 0 {
            return Err(Error::InvalidParameter("max_positive must be >= 1".into()));
        }
        Ok(())
    }
}

/// Draws a count in `min..=max` with probability proportional to
/// `decay^(n - min)`.
pub fn sample_click_count(rng: &mut Rng, min: usize, max: usize, decay: f64) -> usize {
    if max <= min {
        return min;
    }
    let weights: Vec<f64> = (0..=max - min).map(|k| decay.powi(k as i32)).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, w) in weights.iter().enumerate() {
        if u < *w {
            return min + k;
        }
        u -= w;
    }
    max
}

fn pick(rng: &mut Rng, pool: &[Pixel], n: usize, polarity: Polarity, out: &mut Vec<Click>) {
    for p in pool.choose_multiple(rng, n.min(pool.len())) {
        out.push(Click::new(p.x, p.y, polarity));
    }
}

/// Training-time clicks: at least one positive inside the mask and zero or
/// more negatives in a background band around it, counts decaying
/// geometrically. Positives come first; `round` is the order index.
pub fn gen_training_clicks(
    mask: &BinaryMask,
    cfg: &TrainingClickConfig,
    seed: u64,
) -> Result<Vec<Click>> {
    cfg.validate()?;
    if mask.is_empty() {
        return Err(Error::InvalidParameter("cannot place clicks on an empty mask".into()));
    }
    let mut rng = rng::seeded(seed);
    let n_pos = sample_click_count(&mut rng, 1, cfg.max_positive, cfg.decay);
    let n_neg = sample_click_count(&mut rng, 0, cfg.max_negative, cfg.decay);
    let fg: Vec<Pixel> = mask.pixels().collect();
    let band = dilate(mask, Kernel::disk(cfg.negative_band.max(1))).and_not(mask)?;
    let bg: Vec<Pixel> = band.pixels().collect();
    let mut out = Vec::with_capacity(n_pos + n_neg);
    pick(&mut rng, &fg, n_pos, Polarity::Positive, &mut out);
    pick(&mut rng, &bg, n_neg, Polarity::Negative, &mut out);
    for (i, c) in out.iter_mut().enumerate() {
        c.round = i;
    }
    Ok(out)
}

/// Tight box around `gt` with each side moved independently by up to
/// `jitter` times the box extent along its axis, clamped to the frame.
pub fn simulate_box(gt: &BinaryMask, jitter: f64, seed: u64) -> Result<PixelBox> {
    if !(0.0..=1.0).contains(&jitter) {
        return Err(Error::InvalidParameter(format!("box jitter {jitter} outside [0, 1]")));
    }
    let b = bbox_of(gt)?;
    if jitter == 0.0 {
        return Ok(b);
    }
    let mut rng = rng::seeded(seed);
    let (w, h) = gt.dims();
    let mut side = |v: usize, extent: usize, limit: usize| -> usize {
        let d = rng.random_range(-jitter..=jitter) * extent as f64;
        (v as f64 + d).round().clamp(0.0, limit as f64) as usize
    };
    let (bw, bh) = (b.width(), b.height());
    let mut x0 = side(b.x0, bw, w);
    let mut x1 = side(b.x1, bw, w);
    let mut y0 = side(b.y0, bh, h);
    let mut y1 = side(b.y1, bh, h);
    if x0 > x1 {
        std::mem::swap(&mut x0, &mut x1);
    }
    if y0 > y1 {
        std::mem::swap(&mut y0, &mut y1);
    }
    if x1 == x0 {
        if x1 < w { x1 += 1 } else { x0 -= 1 }
    }
    if y1 == y0 {
        if y1 < h { y1 += 1 } else { y0 -= 1 }
    }
    PixelBox::new(x0, y0, x1, y1)
}
