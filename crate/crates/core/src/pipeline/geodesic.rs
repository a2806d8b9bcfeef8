//! Model-free backend: geodesic distance competition between positive and
//! negative seeds on an 8-connected, color-weighted pixel graph.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::backend::{BackendError, CoarseRequest, SegmenterBackend};
use crate::mask::{resize_mask, resize_rgb, resize_score, BinaryMask, ResizeMode, ScoreMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeodesicParams {
    /// Weight of the normalized distance contrast.
    pub alpha: f32,
    /// Weight of the previous-mask prior.
    pub beta: f32,
    /// Color-difference cost per unit of RGB distance (0..255 scale).
    pub gamma: f64,
    pub epsilon: f64,
}

impl Default for GeodesicParams {
    fn default() -> Self {
        Self {
            alpha: 6.0,
            beta: 1.0,
            gamma: 10.0 / 255.0,
            epsilon: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ClassicalGeodesicBackend {
    pub params: GeodesicParams,
}

impl ClassicalGeodesicBackend {
    pub fn new(params: GeodesicParams) -> Self {
        Self { params }
    }
}

const NEIGHBORS: [(i64, i64); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

fn color_dist(a: &image::Rgb<u8>, b: &image::Rgb<u8>) -> f64 {
    let mut s = 0.0;
    for c in 0..3 {
        let d = a.0[c] as f64 - b.0[c] as f64;
        s += d * d;
    }
    s.sqrt()
}

/// Multi-source geodesic distances from `seeds`. With `border_seeds`, every
/// border pixel is also reached from a virtual outside node at cost 1.
pub fn geodesic_distance(
    image: &RgbImage,
    seeds: &BinaryMask,
    border_seeds: bool,
    gamma: f64,
) -> Vec<f64> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let mut dist = vec![f64::INFINITY; w * h];
    // non-negative f64 bit patterns order like the values
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
    let push = |dist: &mut Vec<f64>, heap: &mut BinaryHeap<_>, i: usize, d: f64| {
        if d < dist[i] {
            dist[i] = d;
            heap.push(Reverse((d.to_bits(), i)));
        }
    };
    if border_seeds {
        for y in 0..h {
            for x in 0..w {
                if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                    push(&mut dist, &mut heap, y * w + x, 1.0);
                }
            }
        }
    }
    for p in seeds.pixels() {
        push(&mut dist, &mut heap, p.y * w + p.x, 0.0);
    }
    while let Some(Reverse((bits, i))) = heap.pop() {
        let d = f64::from_bits(bits);
        if d > dist[i] {
            continue;
        }
        let (x, y) = ((i % w) as i64, (i / w) as i64);
        let here = image.get_pixel(x as u32, y as u32);
        for (dx, dy) in NEIGHBORS {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                continue;
            }
            let there = image.get_pixel(nx as u32, ny as u32);
            let nd = d + 1.0 + gamma * color_dist(here, there);
            push(&mut dist, &mut heap, ny as usize * w + nx as usize, nd);
        }
    }
    dist
}

fn logits(
    p: &GeodesicParams,
    image: &RgbImage,
    positive: &BinaryMask,
    negative: &BinaryMask,
    prev: &BinaryMask,
) -> ScoreMap {
    let (w, h) = prev.dims();
    let pos_seeds = if positive.is_empty() { prev } else { positive };
    let d_pos = geodesic_distance(image, pos_seeds, false, p.gamma);
    let d_neg = geodesic_distance(image, negative, negative.is_empty(), p.gamma);
    let prev = prev.data();
    let data: Vec<f32> = (0..w * h)
        .map(|i| {
            let (dp, dn) = (d_pos[i], d_neg[i]);
            let contrast = if dp.is_finite() {
                ((dn - dp) / (dn + dp + p.epsilon)) as f32
            } else {
                -1.0
            };
            p.alpha * contrast + p.beta * (2.0 * prev[i] as f32 - 1.0)
        })
        .collect();
    ScoreMap::from_vec(w, h, data).expect("finite logits")
}

impl SegmenterBackend for ClassicalGeodesicBackend {
    fn name(&self) -> &str {
        "classical"
    }

    fn coarse_segment(&self, req: &CoarseRequest<'_>) -> Result<ScoreMap, BackendError> {
        let p = &self.params;
        let (w, h) = req.out_dims();
        let img_dims = (req.image.width() as usize, req.image.height() as usize);
        if img_dims != (w, h) || req.bimap.dims() != (w, h) || req.prev_mask.dims() != (w, h) {
            return Err(BackendError::Failed("crop inputs disagree on dimensions".into()));
        }
        if req.bimap.is_empty() && req.prev_mask.is_empty() {
            return Err(BackendError::NoSeeds);
        }
        // Work at the source resolution: magnifying the crop would stretch
        // spatial distances while leaving edge costs unchanged.
        let src = req.transform.source_box;
        let (ww, wh) = (w.min(src.width()), h.min(src.height()));
        if (ww, wh) == (w, h) {
            return Ok(logits(p, req.image, &req.bimap.positive, &req.bimap.negative, req.prev_mask));
        }
        let down = |m: &BinaryMask| resize_mask(m, ww, wh, ResizeMode::Nearest);
        let fail = |e: crate::error::Error| BackendError::Failed(e.to_string());
        let small = logits(
            p,
            &resize_rgb(req.image, ww, wh),
            &down(&req.bimap.positive).map_err(fail)?,
            &down(&req.bimap.negative).map_err(fail)?,
            &down(req.prev_mask).map_err(fail)?,
        );
        resize_score(&small, w, h, ResizeMode::Bilinear).map_err(fail)
    }
}
