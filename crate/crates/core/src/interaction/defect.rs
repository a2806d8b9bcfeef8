//! Defective-mask simulation from superpixels.
//!
//! Starting from the ground truth, superpixels are added or removed one at a
//! time according to a sampled error type until the mask's IoU with the
//! ground truth falls into a target window. Overshooting below the window
//! restarts from the ground truth.

use std::collections::HashMap;

use image::RgbImage;
use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{boundary_band, dilate, BinaryMask, Kernel, Pixel};
use crate::rng::{self, Rng};
use crate::superpixel::{slic, SlicParams};

/// Smallest ground truth accepted, in pixels.
pub const MIN_GT_AREA: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorType {
    Boundary,
    External,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DefectSpec {
    /// Probabilities of boundary, external and internal errors.
    pub error_type_probs: [f64; 3],
    pub min_iou: f64,
    pub max_iou: f64,
    pub pixel_number_choices: Vec<usize>,
    pub seed: u64,
    pub boundary_band: usize,
    pub max_restarts: usize,
    pub max_steps: usize,
}

impl Default for DefectSpec {
    fn default() -> Self {
        Self {
            error_type_probs: [0.65, 0.25, 0.1],
            min_iou: 0.75,
            max_iou: 0.85,
            pixel_number_choices: vec![50, 100, 200, 300, 500, 700],
            seed: 0,
            boundary_band: 5,
            max_restarts: 200,
            max_steps: 200,
        }
    }
}

impl DefectSpec {
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.error_type_probs.iter().sum();
        if self.error_type_probs.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidParameter(format!(
                "error type probabilities {:?} are not a distribution",
                self.error_type_probs
            )));
        }
        if !(0.0 < self.min_iou && self.min_iou < self.max_iou && self.max_iou <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "iou window [{}, {}] invalid",
                self.min_iou, self.max_iou
            )));
        }
        if self.pixel_number_choices.is_empty() || self.pixel_number_choices.contains(&0) {
            return Err(Error::InvalidParameter("pixel number choices must be positive".into()));
        }
        Ok(())
    }
}

pub fn sample_error_type(rng: &mut Rng, probs: &[f64; 3]) -> ErrorType {
    let u: f64 = rng.random();
    if u < probs[0] {
        ErrorType::Boundary
    } else if u < probs[0] + probs[1] {
        ErrorType::External
    } else {
        ErrorType::Internal
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectOutcome {
    pub mask: BinaryMask,
    pub iou: f64,
    /// Error types sampled during the successful attempt, in order.
    pub trace: Vec<ErrorType>,
    pub restarts: usize,
}

struct Superpixels {
    pixels: Vec<Vec<Pixel>>,
    boundary: Vec<usize>,
    external: Vec<usize>,
    internal: Vec<usize>,
}

fn analyse(image: &RgbImage, gt: &BinaryMask, band: &BinaryMask, near: &BinaryMask, n: usize) -> Result<Superpixels> {
    let n = n.min(gt.width() * gt.height());
    let lab = slic(image, &SlicParams::with_segments(n))?;
    let k = lab.region_count as usize;
    let mut pixels = vec![Vec::new(); k + 1];
    let mut in_gt = vec![0usize; k + 1];
    let mut in_band = vec![false; k + 1];
    let mut touches = vec![false; k + 1];
    for y in 0..gt.height() {
        for x in 0..gt.width() {
            let l = lab.get(x, y) as usize;
            pixels[l].push(Pixel::new(x, y));
            in_gt[l] += gt.get(x, y) as usize;
            in_band[l] |= band.get(x, y);
            touches[l] |= near.get(x, y);
        }
    }
    let labels = 1..=k;
    Ok(Superpixels {
        boundary: labels.clone().filter(|&l| in_band[l]).collect(),
        external: labels
            .clone()
            .filter(|&l| 2 * in_gt[l] < pixels[l].len() && touches[l])
            .collect(),
        internal: labels.filter(|&l| in_gt[l] == pixels[l].len()).collect(),
        pixels,
    })
}

/// Simulates a defective mask whose IoU with `gt` lies in the spec's window.
pub fn simulate_defective_mask(
    image: &RgbImage,
    gt: &BinaryMask,
    spec: &DefectSpec,
) -> Result<DefectOutcome> {
    spec.validate()?;
    if (image.width() as usize, image.height() as usize) != gt.dims() {
        return Err(Error::DimensionMismatch(
            image.width() as usize,
            image.height() as usize,
            gt.width(),
            gt.height(),
        ));
    }
    let area = gt.count();
    if area < MIN_GT_AREA {
        return Err(Error::InvalidParameter(format!(
            "ground truth has {area} px, need at least {MIN_GT_AREA}"
        )));
    }
    let band = boundary_band(gt, spec.boundary_band);
    // 8-connected outer neighbors of the ground truth
    let near = dilate(gt, Kernel::square(1)).and_not(gt)?;
    let mut cache: HashMap<usize, Superpixels> = HashMap::new();
    let mut rng = rng::seeded(spec.seed);
    for restart in 0..spec.max_restarts {
        let mut sim = gt.clone();
        let (mut inter, mut union) = (area, area);
        let mut trace = Vec::new();
        for _ in 0..spec.max_steps {
            let et = sample_error_type(&mut rng, &spec.error_type_probs);
            trace.push(et);
            let n = *spec.pixel_number_choices.choose(&mut rng).unwrap();
            if !cache.contains_key(&n) {
                cache.insert(n, analyse(image, gt, &band, &near, n)?);
            }
            let sp = &cache[&n];
            let pool = match et {
                ErrorType::Boundary => &sp.boundary,
                ErrorType::External => &sp.external,
                ErrorType::Internal => &sp.internal,
            };
            let Some(&label) = pool.choose(&mut rng) else {
                continue;
            };
            let px = &sp.pixels[label];
            let add = match et {
                ErrorType::External => true,
                ErrorType::Internal => false,
                ErrorType::Boundary => {
                    let on = px.iter().filter(|p| sim.get(p.x, p.y)).count();
                    2 * on < px.len()
                }
            };
            for p in px {
                if sim.get(p.x, p.y) == add {
                    continue;
                }
                sim.set(p.x, p.y, add);
                match (gt.get(p.x, p.y), add) {
                    (true, true) => inter += 1,
                    (true, false) => inter -= 1,
                    (false, true) => union += 1,
                    (false, false) => union -= 1,
                }
            }
            let iou = inter as f64 / union as f64;
            if iou < spec.min_iou {
                break;
            }
            if iou <= spec.max_iou {
                return Ok(DefectOutcome {
                    mask: sim,
                    iou,
                    trace,
                    restarts: restart,
                });
            }
        }
    }
    Err(Error::DefectUnreachable(spec.max_restarts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::iou;

    fn scene() -> (RgbImage, BinaryMask) {
        let gt = BinaryMask::from_fn(96, 96, |x, y| {
            let (dx, dy) = (x as f64 - 48.0, y as f64 - 48.0);
            dx * dx + dy * dy <= 22.0 * 22.0
        });
        let img = RgbImage::from_fn(96, 96, |x, y| {
            let t = ((x * 7 + y * 13) % 23) as u8;
            if gt.get(x as usize, y as usize) {
                image::Rgb([200 + t, 60, 40])
            } else {
                image::Rgb([30, 90 + t, 160])
            }
        });
        (img, gt)
    }

    #[test]
    fn lands_in_window_and_is_deterministic() {
        let (img, gt) = scene();
        for seed in 0..5 {
            let spec = DefectSpec {
                seed,
                ..Default::default()
            };
            let a = simulate_defective_mask(&img, &gt, &spec).unwrap();
            let v = iou(&gt, &a.mask).unwrap();
            assert!((0.75..=0.85).contains(&v), "{v}");
            assert!((v - a.iou).abs() < 1e-12);
            assert!(!a.trace.is_empty());
            let b = simulate_defective_mask(&img, &gt, &spec).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn error_type_frequencies() {
        let mut rng = rng::seeded(11);
        let mut hist = [0usize; 3];
        for _ in 0..1000 {
            hist[sample_error_type(&mut rng, &[0.65, 0.25, 0.1]) as usize] += 1;
        }
        for (h, p) in hist.iter().zip([0.65, 0.25, 0.1]) {
            assert!((*h as f64 / 1000.0 - p).abs() <= 0.05);
        }
    }

    #[test]
    fn rejects_small_and_bad_specs() {
        let (img, _) = scene();
        let small = BinaryMask::from_rect(96, 96, 0, 0, 10, 10);
        assert!(simulate_defective_mask(&img, &small, &DefectSpec::default()).is_err());
        let bad = DefectSpec {
            error_type_probs: [0.5, 0.5, 0.5],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = DefectSpec {
            min_iou: 0.9,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
