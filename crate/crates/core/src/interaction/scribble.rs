//! Scribble simulation: the deterministic evaluation chain and the randomized
//! training styles.

use std::collections::VecDeque;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{click_disk, Polarity};
use crate::error::{Error, Result};
use crate::mask::{
    argmax_deepest, boundary_band, dilate, erode, largest_component, xor_diff, BinaryMask,
    Connectivity, Kernel, Pixel,
};
use crate::rng;
use crate::skeleton::{
    break_cycles, build_radius_graph, longest_path, medial_axis, rasterize_bezier, ScribblePath,
    SkeletonGraph, subsample_controls, DEFAULT_MAX_CONTROLS,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalScribbleConfig {
    pub thickness: usize,
    pub graph_radius: f64,
    /// Keep at most this many skeleton vertices (the central stretch).
    pub max_len_cap: Option<usize>,
}

impl Default for EvalScribbleConfig {
    fn default() -> Self {
        Self {
            thickness: 3,
            graph_radius: 3.0,
            max_len_cap: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalScribble {
    pub raster: BinaryMask,
    pub polarity: Polarity,
    /// `None` when the chain fell back to a click disk.
    pub path: Option<ScribblePath>,
}

/// Skeleton-diameter path of a region, as pixel waypoints.
pub(crate) fn axis_path(region: &BinaryMask, radius: f64) -> Vec<Pixel> {
    let skel = medial_axis(region);
    let forest = break_cycles(&build_radius_graph(&skel, radius));
    let lp = longest_path(&forest);
    lp.indices.iter().map(|&i| forest.vertices[i]).collect()
}

/// Deterministic scribble correcting the largest error component.
///
/// The stroke follows the diameter of the component's skeleton forest and is
/// drawn with the configured thickness. The spline is refit with more
/// control points until it stays within two pixels of the component, and is
/// clipped there if even the full waypoint list overshoots.
pub fn eval_scribble(
    gt: &BinaryMask,
    pred: &BinaryMask,
    cfg: &EvalScribbleConfig,
) -> Result<EvalScribble> {
    let err = xor_diff(gt, pred)?;
    if err.is_empty() {
        return Err(Error::AlreadyPerfect);
    }
    let (w, h) = gt.dims();
    let region = largest_component(&err, Connectivity::Eight, None);
    let deepest = argmax_deepest(&region).expect("non-empty region");
    let polarity = if gt.get(deepest.x, deepest.y) {
        Polarity::Positive
    } else {
        Polarity::Negative
    };
    let mut points = axis_path(&region, cfg.graph_radius);
    if let Some(cap) = cfg.max_len_cap {
        let cap = cap.max(2);
        if points.len() > cap {
            let start = (points.len() - cap) / 2;
            points = points[start..start + cap].to_vec();
        }
    }
    if points.len() < 2 {
        return Ok(EvalScribble {
            raster: click_disk(deepest, w, h),
            polarity,
            path: None,
        });
    }
    let allowed = dilate(&region, Kernel::disk(2));
    let mut controls = DEFAULT_MAX_CONTROLS;
    let (raster, fitted) = loop {
        let r = rasterize_bezier(&points, cfg.thickness, controls, w, h);
        if r.and_not(&allowed)?.is_empty() {
            break (r, subsample_controls(&points, controls));
        }
        if controls >= points.len() {
            break (r.and(&allowed)?, points);
        }
        controls *= 2;
    };
    // The path carries exactly the controls that produced the raster.
    Ok(EvalScribble {
        raster,
        polarity,
        path: Some(ScribblePath {
            points: fitted,
            thickness: cfg.thickness,
        }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScribbleStyle {
    Bezier,
    Axial,
    Boundary,
    Composed,
}

impl std::str::FromStr for ScribbleStyle {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bezier" => Ok(Self::Bezier),
            "axial" => Ok(Self::Axial),
            "boundary" => Ok(Self::Boundary),
            "composed" => Ok(Self::Composed),
            other => Err(Error::InvalidParameter(format!("unknown scribble style {other:?}"))),
        }
    }
}

const BEZIER_ATTEMPTS: usize = 20;

fn single_pixel(mask: &BinaryMask) -> BinaryMask {
    let mut out = BinaryMask::new(mask.width(), mask.height());
    if let Some(p) = argmax_deepest(mask) {
        out.set(p.x, p.y, true);
    }
    out
}

fn bezier_style(mask: &BinaryMask, thickness: usize, rng: &mut rng::Rng) -> Result<BinaryMask> {
    let (w, h) = mask.dims();
    let support = erode(mask, Kernel::disk(thickness / 2));
    let pool: Vec<Pixel> = support.pixels().collect();
    if pool.len() < 2 {
        return Ok(single_pixel(mask));
    }
    for _ in 0..BEZIER_ATTEMPTS {
        let n = rng.random_range(3..=5).min(pool.len());
        let ctrl: Vec<Pixel> = pool.choose_multiple(rng, n).copied().collect();
        let r = rasterize_bezier(&ctrl, thickness, ctrl.len(), w, h);
        if r.and_not(mask)?.is_empty() {
            return Ok(r);
        }
    }
    // straight stroke between two support pixels of the same component
    let a = *pool.choose(rng).unwrap();
    let comp = largest_component(&support, Connectivity::Eight, Some(a));
    let far = comp
        .pixels()
        .max_by_key(|p| (p.x.abs_diff(a.x).pow(2) + p.y.abs_diff(a.y).pow(2), std::cmp::Reverse(*p)))
        .unwrap();
    let r = rasterize_bezier(&[a, far], thickness, 2, w, h);
    Ok(r.and(mask)?)
}

fn axial_style(mask: &BinaryMask, thickness: usize) -> Result<BinaryMask> {
    let (w, h) = mask.dims();
    let region = largest_component(mask, Connectivity::Eight, None);
    let pts = axis_path(&region, 3.0);
    if pts.len() < 2 {
        return Ok(single_pixel(mask));
    }
    let r = rasterize_bezier(&pts, thickness, DEFAULT_MAX_CONTROLS, w, h);
    Ok(r.and(mask)?)
}

fn bfs_path(g: &SkeletonGraph, adj: &[Vec<usize>], start: usize) -> (Vec<usize>, Vec<usize>) {
    let mut parent = vec![usize::MAX; g.vertices.len()];
    let mut order = Vec::new();
    let mut q = VecDeque::from([start]);
    parent[start] = start;
    while let Some(v) = q.pop_front() {
        order.push(v);
        for &u in &adj[v] {
            if parent[u] == usize::MAX {
                parent[u] = v;
                q.push_back(u);
            }
        }
    }
    (order, parent)
}

fn boundary_style(mask: &BinaryMask, thickness: usize, rng: &mut rng::Rng) -> Result<BinaryMask> {
    let (w, h) = mask.dims();
    let contour = mask.and_not(&erode(mask, Kernel::square(1)))?;
    let forest = break_cycles(&build_radius_graph(&contour, 1.5));
    if forest.vertices.len() < 2 {
        return Ok(single_pixel(mask));
    }
    let adj = forest.adjacency();
    let start = rng.random_range(0..forest.vertices.len());
    let (order, parent) = bfs_path(&forest, &adj, start);
    let end = *order.last().unwrap();
    let mut path = vec![end];
    let mut cur = end;
    while cur != start {
        cur = parent[cur];
        path.push(cur);
    }
    if path.len() < 2 {
        return Ok(single_pixel(mask));
    }
    let frac = rng.random_range(0.3..=1.0);
    let keep = ((path.len() as f64 * frac).ceil() as usize).clamp(2, path.len());
    let pts: Vec<Pixel> = path[..keep].iter().map(|&i| forest.vertices[i]).collect();
    let r = rasterize_bezier(&pts, thickness, DEFAULT_MAX_CONTROLS, w, h);
    let allowed = dilate(&boundary_band(mask, 1), Kernel::square(thickness));
    Ok(r.and(&allowed)?)
}

/// Training scribble in the requested style with thickness drawn uniformly
/// from 3..=7. Bezier and axial strokes stay inside the mask; boundary
/// strokes stay near its contour; composed is the union of one to three
/// distinct base styles.
pub fn gen_training_scribble(
    mask: &BinaryMask,
    style: ScribbleStyle,
    seed: u64,
) -> Result<BinaryMask> {
    if mask.is_empty() {
        return Err(Error::InvalidParameter("cannot scribble on an empty mask".into()));
    }
    let mut rng = rng::seeded(seed);
    let thickness = rng.random_range(3..=7usize);
    match style {
        ScribbleStyle::Bezier => bezier_style(mask, thickness, &mut rng),
        ScribbleStyle::Axial => axial_style(mask, thickness),
        ScribbleStyle::Boundary => boundary_style(mask, thickness, &mut rng),
        ScribbleStyle::Composed => {
            let mut styles = [ScribbleStyle::Bezier, ScribbleStyle::Axial, ScribbleStyle::Boundary];
            styles.shuffle(&mut rng);
            let n = rng.random_range(1..=3);
            let mut out = BinaryMask::new(mask.width(), mask.height());
            for (k, s) in styles[..n].iter().enumerate() {
                let sub = rng::stream(seed, k as u64 + 1).random::<u64>();
                out.or_assign(&gen_training_scribble(mask, *s, sub)?)?;
            }
            Ok(out)
        }
    }
}
