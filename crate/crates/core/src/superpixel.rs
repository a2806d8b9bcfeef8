//! SLIC superpixels in CIELAB space.
//!
//! Cluster centers start on a regular grid, pixels are assigned within a
//! local window by the usual joint color/space distance, and after the last
//! iteration every cluster keeps only its largest 4-connected piece; the
//! remaining fragments are absorbed into the neighbor they share the
//! longest border with. Output labels run 1..K in row-major first-encounter
//! order.

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::RegionLabeling;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlicParams {
    pub n_segments: usize,
    pub compactness: f64,
    pub iterations: usize,
    /// Carried for provenance; grid seeding makes the result independent of it.
    pub seed: u64,
}

impl Default for SlicParams {
    fn default() -> Self {
        Self {
            n_segments: 100,
            compactness: 10.0,
            iterations: 10,
            seed: 0,
        }
    }
}

impl SlicParams {
    pub fn with_segments(n_segments: usize) -> Self {
        Self {
            n_segments,
            ..Self::default()
        }
    }
}

fn srgb_to_linear(c: u8) -> f64 {
    let c = c as f64 / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

/// sRGB (D65) to CIELAB.
pub fn rgb_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let (r, g, b) = (
        srgb_to_linear(rgb[0]),
        srgb_to_linear(rgb[1]),
        srgb_to_linear(rgb[2]),
    );
    let x = (0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b) / 0.950_47;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175 * b;
    let z = (0.019_333_9 * r + 0.119_192 * g + 0.950_304_1 * b) / 1.088_83;
    let f = |t: f64| {
        if t > 216.0 / 24389.0 {
            t.cbrt()
        } else {
            (24389.0 / 27.0 * t + 16.0) / 116.0
        }
    };
    let (fx, fy, fz) = (f(x), f(y), f(z));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

#[derive(Clone, Copy)]
struct Center {
    lab: [f64; 3],
    x: f64,
    y: f64,
}

pub fn slic(image: &RgbImage, p: &SlicParams) -> Result<RegionLabeling> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let n = w * h;
    if n == 0 {
        return Err(Error::InvalidDimensions(w, h));
    }
    if p.n_segments == 0 || p.iterations == 0 || p.compactness.is_nan() || p.compactness <= 0.0 {
        return Err(Error::InvalidParameter(
            "slic needs n_segments >= 1, iterations >= 1 and compactness > 0".into(),
        ));
    }
    if p.n_segments > n {
        return Err(Error::InvalidParameter(format!(
            "{} segments requested for {} pixels",
            p.n_segments, n
        )));
    }

    let lab: Vec<[f64; 3]> = image.pixels().map(|px| rgb_to_lab(px.0)).collect();

    let k = p.n_segments as f64;
    let nx = ((k * w as f64 / h as f64).sqrt().round() as usize).clamp(1, w);
    let ny = ((k / nx as f64).round() as usize).clamp(1, h);
    let (sx, sy) = (w as f64 / nx as f64, h as f64 / ny as f64);
    let step = (n as f64 / k).sqrt();
    let window = sx.max(sy).ceil() as i64;

    let mut centers: Vec<Center> = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let x = (i as f64 + 0.5) * sx;
            let y = (j as f64 + 0.5) * sy;
            let idx = (y as usize).min(h - 1) * w + (x as usize).min(w - 1);
            centers.push(Center { lab: lab[idx], x, y });
        }
    }

    let spatial = (p.compactness / step).powi(2);
    let mut assign = vec![0usize; n];
    let mut dist = vec![f64::INFINITY; n];
    for _ in 0..p.iterations {
        dist.fill(f64::INFINITY);
        for (ci, c) in centers.iter().enumerate() {
            let (cx, cy) = (c.x.floor() as i64, c.y.floor() as i64);
            let y_lo = (cy - window).max(0) as usize;
            let y_hi = ((cy + window + 1).min(h as i64)) as usize;
            let x_lo = (cx - window).max(0) as usize;
            let x_hi = ((cx + window + 1).min(w as i64)) as usize;
            for y in y_lo..y_hi {
                for x in x_lo..x_hi {
                    let i = y * w + x;
                    let l = &lab[i];
                    let dc = (l[0] - c.lab[0]).powi(2)
                        + (l[1] - c.lab[1]).powi(2)
                        + (l[2] - c.lab[2]).powi(2);
                    let ds = (x as f64 + 0.5 - c.x).powi(2) + (y as f64 + 0.5 - c.y).powi(2);
                    let d = dc + ds * spatial;
                    if d < dist[i] {
                        dist[i] = d;
                        assign[i] = ci;
                    }
                }
            }
        }
        let mut acc = vec![[0f64; 6]; centers.len()];
        for (i, &ci) in assign.iter().enumerate() {
            let a = &mut acc[ci];
            a[0] += lab[i][0];
            a[1] += lab[i][1];
            a[2] += lab[i][2];
            a[3] += (i % w) as f64 + 0.5;
            a[4] += (i / w) as f64 + 0.5;
            a[5] += 1.0;
        }
        for (c, a) in centers.iter_mut().zip(&acc) {
            if a[5] > 0.0 {
                c.lab = [a[0] / a[5], a[1] / a[5], a[2] / a[5]];
                c.x = a[3] / a[5];
                c.y = a[4] / a[5];
            }
        }
    }

    Ok(enforce_connectivity(&assign, w, h, centers.len()))
}

/// Keeps the largest 4-connected piece of each cluster and merges the other
/// pieces into the neighbor with the longest shared border.
fn enforce_connectivity(assign: &[usize], w: usize, h: usize, n_clusters: usize) -> RegionLabeling {
    let n = w * h;
    // fragments: 4-connected runs of equal cluster id
    let mut frag = vec![usize::MAX; n];
    let mut frag_cluster = Vec::new();
    let mut frag_area = Vec::new();
    let mut stack = Vec::new();
    for s in 0..n {
        if frag[s] != usize::MAX {
            continue;
        }
        let id = frag_cluster.len();
        let c = assign[s];
        frag[s] = id;
        stack.push(s);
        let mut area = 0usize;
        while let Some(i) = stack.pop() {
            area += 1;
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if frag[j] == usize::MAX && assign[j] == c {
                    frag[j] = id;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        frag_cluster.push(c);
        frag_area.push(area);
    }

    let n_frag = frag_cluster.len();
    let mut keeper = vec![usize::MAX; n_clusters];
    for f in 0..n_frag {
        let c = frag_cluster[f];
        if keeper[c] == usize::MAX || frag_area[f] > frag_area[keeper[c]] {
            keeper[c] = f;
        }
    }

    // border lengths between fragments
    let mut border: Vec<std::collections::BTreeMap<usize, usize>> = vec![Default::default(); n_frag];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let mut link = |j: usize| {
                let (a, b) = (frag[i], frag[j]);
                if a != b {
                    *border[a].entry(b).or_default() += 1;
                    *border[b].entry(a).or_default() += 1;
                }
            };
            if x + 1 < w {
                link(i + 1);
            }
            if y + 1 < h {
                link(i + w);
            }
        }
    }

    // final cluster of each fragment; orphans are resolved pass by pass
    let mut owner: Vec<Option<usize>> = (0..n_frag)
        .map(|f| (keeper[frag_cluster[f]] == f).then_some(frag_cluster[f]))
        .collect();
    loop {
        let mut pending = false;
        let mut progressed = false;
        for f in 0..n_frag {
            if owner[f].is_some() {
                continue;
            }
            let mut votes: std::collections::BTreeMap<usize, usize> = Default::default();
            for (&g, &len) in &border[f] {
                if let Some(c) = owner[g] {
                    *votes.entry(c).or_default() += len;
                }
            }
            match votes.into_iter().max_by_key(|&(c, len)| (len, std::cmp::Reverse(c))) {
                Some((c, _)) => {
                    owner[f] = Some(c);
                    progressed = true;
                }
                None => pending = true,
            }
        }
        if !pending || !progressed {
            break;
        }
    }

    let mut relabel = vec![0u32; n_clusters];
    let mut next = 0u32;
    let mut labels = vec![0u32; n];
    for i in 0..n {
        let c = owner[frag[i]].expect("image is connected, so every fragment gets an owner");
        if relabel[c] == 0 {
            next += 1;
            relabel[c] = next;
        }
        labels[i] = relabel[c];
    }
    RegionLabeling {
        width: w,
        height: h,
        labels,
        region_count: next,
    }
}
