//! Coarse-mask perturbation by local morphology.

use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::crop::bbox_of;
use crate::error::{Error, Result};
use crate::mask::{boundary_band, morphology, BinaryMask, Kernel, MorphOp, Pixel};
use crate::rng;

const MAX_STEPS: usize = 500;

/// One of five target IoU bands for perturbed coarse masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct PerturbLevel(u8);

impl PerturbLevel {
    pub const ALL: [PerturbLevel; 5] = [
        PerturbLevel(1),
        PerturbLevel(2),
        PerturbLevel(3),
        PerturbLevel(4),
        PerturbLevel(5),
    ];

    pub fn new(level: u8) -> Result<Self> {
        if (1..=5).contains(&level) {
            Ok(Self(level))
        } else {
            Err(Error::InvalidParameter(format!("perturbation level {level} outside 1..=5")))
        }
    }

    pub fn level(self) -> u8 {
        self.0
    }

    pub fn target_iou_range(self) -> (f64, f64) {
        match self.0 {
            1 => (0.85, 0.90),
            2 => (0.75, 0.80),
            3 => (0.65, 0.70),
            4 => (0.55, 0.60),
            _ => (0.45, 0.50),
        }
    }
}

impl TryFrom<u8> for PerturbLevel {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PerturbLevel> for u8 {
    fn from(l: PerturbLevel) -> u8 {
        l.0
    }
}

struct Counts {
    inter: usize,
    union: usize,
}

impl Counts {
    fn iou(&self) -> f64 {
        if self.union == 0 {
            1.0
        } else {
            self.inter as f64 / self.union as f64
        }
    }
}

/// Degrades `gt` until its IoU with the original lands in the level's band.
///
/// Each step erodes or dilates (disk or rectangle kernel, radius 1..=5) a
/// random window centered on the current boundary. A step is kept only if it
/// lowers the IoU without dropping below the band. Fails after 500 steps.
pub fn perturb_mask(gt: &BinaryMask, level: PerturbLevel, seed: u64) -> Result<BinaryMask> {
    let bb = bbox_of(gt)?;
    let (lo, hi) = level.target_iou_range();
    let (w, h) = gt.dims();
    let mut rng = rng::seeded(seed);
    let mut cur = gt.clone();
    let mut counts = Counts {
        inter: gt.count(),
        union: gt.count(),
    };
    let extent = bb.width().max(bb.height());
    let mut best = 1.0f64;
    for _ in 0..MAX_STEPS {
        let iou = counts.iou();
        if (lo..=hi).contains(&iou) {
            return Ok(cur);
        }
        let radius = rng.random_range(1..=5usize);
        let kernel = if rng.random_bool(0.5) {
            Kernel::disk(radius)
        } else {
            Kernel::square(radius)
        };
        let op = if rng.random_bool(0.5) {
            MorphOp::Erode
        } else {
            MorphOp::Dilate
        };
        let edge: Vec<Pixel> = boundary_band(&cur, 1).pixels().collect();
        let centre = match edge.choose(&mut rng) {
            Some(p) => *p,
            None => *gt.pixels().collect::<Vec<_>>().choose(&mut rng).unwrap(),
        };
        let half_max = (extent / 2).max(radius + 2);
        let half = rng.random_range(radius + 2..=half_max);
        let wx0 = centre.x.saturating_sub(half);
        let wy0 = centre.y.saturating_sub(half);
        let wx1 = (centre.x + half + 1).min(w);
        let wy1 = (centre.y + half + 1).min(h);
        // work on the window plus a kernel margin so the window interior is exact
        let m = radius + 1;
        let (cx0, cy0) = (wx0.saturating_sub(m), wy0.saturating_sub(m));
        let (cx1, cy1) = ((wx1 + m).min(w), (wy1 + m).min(h));
        let patch = morphology(&cur.crop(cx0, cy0, cx1, cy1), op, kernel);
        let (mut inter, mut union) = (counts.inter, counts.union);
        let mut changes = Vec::new();
        for y in wy0..wy1 {
            for x in wx0..wx1 {
                let old = cur.get(x, y);
                let new = patch.get(x - cx0, y - cy0);
                if old == new {
                    continue;
                }
                let g = gt.get(x, y);
                if g {
                    if new { inter += 1 } else { inter -= 1 }
                } else if new {
                    union += 1
                } else {
                    union -= 1
                }
                changes.push((x, y, new));
            }
        }
        let cand = Counts { inter, union };
        let new_iou = cand.iou();
        if new_iou < iou && new_iou >= lo {
            for (x, y, v) in changes {
                cur.set(x, y, v);
            }
            counts = cand;
            best = new_iou;
        }
    }
    let iou = counts.iou();
    if (lo..=hi).contains(&iou) {
        return Ok(cur);
    }
    Err(Error::PerturbUnreachable { lo, hi, best })
}
