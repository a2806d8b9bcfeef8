//! Skeletons, skeleton graphs and stroke rasterization.
//!
//! The deterministic scribble chain is: thin a region to a 1-px skeleton,
//! connect skeleton pixels closer than a radius, drop cycles by keeping a
//! minimum spanning forest, take the longest shortest-path (tree diameter),
//! and draw a composite cubic Bezier through points along it.
//!
//! Path lengths are tracked exactly as integer combinations of square roots
//! of square-free integers, so diameter comparisons and ties are exact.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::mask::{BinaryMask, Pixel};

/// Guo–Hall thinning (a Zhang–Suen-style two-subiteration scheme) run to
/// convergence. Out-of-frame pixels are background.
pub fn medial_axis(m: &BinaryMask) -> BinaryMask {
    let mut cur = m.clone();
    let (w, h) = m.dims();
    let mut remove = Vec::new();
    loop {
        let mut changed = false;
        for step in 0..2 {
            remove.clear();
            for y in 0..h {
                for x in 0..w {
                    if !cur.get(x, y) {
                        continue;
                    }
                    let (xi, yi) = (x as i64, y as i64);
                    // P2..P9 clockwise from north
                    let n = [
                        cur.get_signed(xi, yi - 1),
                        cur.get_signed(xi + 1, yi - 1),
                        cur.get_signed(xi + 1, yi),
                        cur.get_signed(xi + 1, yi + 1),
                        cur.get_signed(xi, yi + 1),
                        cur.get_signed(xi - 1, yi + 1),
                        cur.get_signed(xi - 1, yi),
                        cur.get_signed(xi - 1, yi - 1),
                    ];
                    let [p2, p3, p4, p5, p6, p7, p8, p9] = n;
                    let c = (!p2 && (p3 || p4)) as u8
                        + (!p4 && (p5 || p6)) as u8
                        + (!p6 && (p7 || p8)) as u8
                        + (!p8 && (p9 || p2)) as u8;
                    let n1 = (p9 || p2) as u8 + (p3 || p4) as u8 + (p5 || p6) as u8 + (p7 || p8) as u8;
                    let n2 = (p2 || p3) as u8 + (p4 || p5) as u8 + (p6 || p7) as u8 + (p8 || p9) as u8;
                    let guard = if step == 0 {
                        (p6 || p7 || !p9) && p8
                    } else {
                        (p2 || p3 || !p5) && p4
                    };
                    let ok = c == 1 && (2..=3).contains(&n1.min(n2)) && !guard;
                    if ok {
                        remove.push((x, y));
                    }
                }
            }
            for &(x, y) in &remove {
                cur.set(x, y, false);
            }
            changed |= !remove.is_empty();
        }
        if !changed {
            return cur;
        }
    }
}

/// Exact path length `Σ coeff · √base` over square-free bases.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PathLength(BTreeMap<u64, u64>);

impl PathLength {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Length of a single edge with squared Euclidean length `d2`.
    pub fn from_squared(d2: u64) -> Self {
        let mut p = Self::zero();
        p.add_squared(d2);
        p
    }

    pub fn add_squared(&mut self, d2: u64) {
        if d2 == 0 {
            return;
        }
        let (mult, base) = split_square(d2);
        *self.0.entry(base).or_default() += mult;
    }

    pub fn plus(&self, d2: u64) -> Self {
        let mut p = self.clone();
        p.add_squared(d2);
        p
    }

    pub fn value(&self) -> f64 {
        self.0.iter().map(|(&b, &c)| c as f64 * (b as f64).sqrt()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.0.iter().map(|(&b, &c)| (b, c))
    }
}

impl PartialOrd for PathLength {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PathLength {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.0 == other.0 {
            return Ordering::Equal;
        }
        // distinct representations are distinct reals; fall back to the
        // representation only if rounding makes the floats collide
        self.value()
            .total_cmp(&other.value())
            .then_with(|| self.0.iter().cmp(other.0.iter()))
    }
}

/// `d2 = mult² · base` with `base` square-free.
fn split_square(mut d2: u64) -> (u64, u64) {
    let mut mult = 1;
    let mut f = 2;
    while f * f <= d2 {
        while d2 % (f * f) == 0 {
            d2 /= f * f;
            mult *= f;
        }
        f += 1;
    }
    (mult, d2)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SkeletonGraph {
    /// Skeleton pixels in row-major order.
    pub vertices: Vec<Pixel>,
    /// Edges `(u, v)` with `u < v`, sorted.
    pub edges: Vec<(usize, usize)>,
}

impl SkeletonGraph {
    pub fn edge_squared_len(&self, u: usize, v: usize) -> u64 {
        let (a, b) = (self.vertices[u], self.vertices[v]);
        let dx = a.x as i64 - b.x as i64;
        let dy = a.y as i64 - b.y as i64;
        (dx * dx + dy * dy) as u64
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }

    /// Component id per vertex, numbered in order of lowest vertex index.
    pub fn components(&self) -> Vec<usize> {
        let adj = self.adjacency();
        let mut comp = vec![usize::MAX; self.vertices.len()];
        let mut next = 0;
        for s in 0..self.vertices.len() {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = next;
            let mut stack = vec![s];
            while let Some(u) = stack.pop() {
                for &v in &adj[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        comp
    }
}

/// Vertices are the skeleton pixels; `(u, v)` is an edge iff
/// `0 < dist(u, v) < radius`.
pub fn build_radius_graph(skel: &BinaryMask, radius: f64) -> SkeletonGraph {
    let vertices: Vec<Pixel> = skel.pixels().collect();
    let mut index = vec![usize::MAX; skel.width() * skel.height()];
    for (i, p) in vertices.iter().enumerate() {
        index[p.y * skel.width() + p.x] = i;
    }
    let reach = radius.ceil() as i64;
    let r2 = radius * radius;
    let mut edges = Vec::new();
    for (u, p) in vertices.iter().enumerate() {
        for dy in 0..=reach {
            for dx in -reach..=reach {
                if dy == 0 && dx <= 0 {
                    continue;
                }
                if ((dx * dx + dy * dy) as f64) >= r2 {
                    continue;
                }
                let (x, y) = (p.x as i64 + dx, p.y as i64 + dy);
                if skel.get_signed(x, y) {
                    let v = index[y as usize * skel.width() + x as usize];
                    edges.push((u.min(v), u.max(v)));
                }
            }
        }
    }
    edges.sort_unstable();
    SkeletonGraph { vertices, edges }
}

/// Minimum spanning forest (Kruskal): shortest edges are kept and cycles are
/// broken at their longest edge. Ties are resolved by endpoint order.
pub fn break_cycles(g: &SkeletonGraph) -> SkeletonGraph {
    let mut order: Vec<(u64, usize, usize)> = g
        .edges
        .iter()
        .map(|&(u, v)| (g.edge_squared_len(u, v), u, v))
        .collect();
    order.sort_unstable();
    let mut parent: Vec<usize> = (0..g.vertices.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut kept = Vec::new();
    for (_, u, v) in order {
        let (a, b) = (find(&mut parent, u), find(&mut parent, v));
        if a != b {
            parent[a.max(b)] = a.min(b);
            kept.push((u, v));
        }
    }
    kept.sort_unstable();
    SkeletonGraph {
        vertices: g.vertices.clone(),
        edges: kept,
    }
}

struct Sweep {
    dist: Vec<Option<PathLength>>,
    parent: Vec<usize>,
}

fn sweep(g: &SkeletonGraph, adj: &[Vec<usize>], src: usize) -> Sweep {
    let n = g.vertices.len();
    let mut dist: Vec<Option<PathLength>> = vec![None; n];
    let mut parent = vec![usize::MAX; n];
    dist[src] = Some(PathLength::zero());
    let mut stack = vec![src];
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if dist[v].is_none() {
                let d = dist[u].as_ref().unwrap().plus(g.edge_squared_len(u, v));
                dist[v] = Some(d);
                parent[v] = u;
                stack.push(v);
            }
        }
    }
    Sweep { dist, parent }
}

/// Farthest reached vertex, ties to the smallest index.
fn farthest(s: &Sweep) -> usize {
    let mut best: Option<(usize, &PathLength)> = None;
    for (v, d) in s.dist.iter().enumerate() {
        if let Some(d) = d {
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((v, d));
            }
        }
    }
    best.expect("source is always reached").0
}

/// Result of [`longest_path`]: vertex indices along the path plus its length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LongestPath {
    pub indices: Vec<usize>,
    pub length: PathLength,
}

/// Diameter path of a forest: the longest shortest path over all
/// components, with ties going to the lexicographically smallest endpoint
/// pair. An empty graph gives an empty path; a lone vertex gives itself.
pub fn longest_path(g: &SkeletonGraph) -> LongestPath {
    if g.vertices.is_empty() {
        return LongestPath {
            indices: Vec::new(),
            length: PathLength::zero(),
        };
    }
    let adj = g.adjacency();
    let comp = g.components();
    let mut roots: Vec<usize> = Vec::new();
    for (v, &c) in comp.iter().enumerate() {
        if c == roots.len() {
            roots.push(v);
        }
    }
    let mut best: Option<(PathLength, usize, usize, Sweep)> = None;
    for &r in &roots {
        let a = farthest(&sweep(g, &adj, r));
        let from_a = sweep(g, &adj, a);
        let b = farthest(&from_a);
        let diameter = from_a.dist[b].clone().unwrap();
        let from_b = sweep(g, &adj, b);
        // in a tree, ecc(v) = max(d(v, a), d(v, b)) for a diameter pair (a, b)
        let u = (0..g.vertices.len())
            .find(|&v| {
                match (&from_a.dist[v], &from_b.dist[v]) {
                    (Some(da), Some(db)) => da.max(db) == &diameter,
                    _ => false,
                }
            })
            .expect("diameter endpoints have full eccentricity");
        let from_u = sweep(g, &adj, u);
        let w = (0..g.vertices.len())
            .find(|&v| from_u.dist[v].as_ref() == Some(&diameter))
            .expect("u has a partner at full distance");
        let better = match &best {
            None => true,
            Some((bd, bu, bw, _)) => diameter > *bd || (diameter == *bd && (u, w) < (*bu, *bw)),
        };
        if better {
            best = Some((diameter, u, w, from_u));
        }
    }
    let (length, u, w, from_u) = best.unwrap();
    let mut indices = vec![w];
    let mut cur = w;
    while cur != u {
        cur = from_u.parent[cur];
        indices.push(cur);
    }
    indices.reverse();
    LongestPath { indices, length }
}

/// A stroke along pixel waypoints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScribblePath {
    #[serde(with = "point_pairs")]
    pub points: Vec<Pixel>,
    pub thickness: usize,
}

mod point_pairs {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::mask::Pixel;

    pub fn serialize<S: Serializer>(pts: &[Pixel], s: S) -> Result<S::Ok, S::Error> {
        pts.iter()
            .map(|p| [p.x, p.y])
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Pixel>, D::Error> {
        let v: Vec<[usize; 2]> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|[x, y]| Pixel::new(x, y)).collect())
    }
}

pub const MAX_THICKNESS: usize = 15;
pub const DEFAULT_MAX_CONTROLS: usize = 16;

fn stamp(out: &mut BinaryMask, cx: f64, cy: f64, radius: i64) {
    let (x, y) = (cx.round() as i64, cy.round() as i64);
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            if dx * dx + dy * dy > radius * radius {
                continue;
            }
            let (px, py) = (x + dx, y + dy);
            if px >= 0 && py >= 0 && (px as usize) < out.width() && (py as usize) < out.height() {
                out.set(px as usize, py as usize, true);
            }
        }
    }
}

/// Every k-th waypoint (always keeping the last) so that at most
/// `max_controls` remain.
pub fn subsample_controls(points: &[Pixel], max_controls: usize) -> Vec<Pixel> {
    let n = points.len();
    let max_controls = max_controls.max(2);
    if n <= max_controls {
        return points.to_vec();
    }
    let k = (n - 1).div_ceil(max_controls - 1);
    let mut out: Vec<Pixel> = points.iter().step_by(k).copied().collect();
    if out.last() != points.last() {
        out.push(*points.last().unwrap());
    }
    out
}

/// Composite cubic Bezier through the (subsampled) waypoints, with
/// Catmull-Rom tangents, stamped with a disk of radius `thickness / 2` and
/// clipped to `width x height`. Each segment is sampled at no fewer than four
/// points per pixel of control-polygon length.
pub fn rasterize_bezier(
    points: &[Pixel],
    thickness: usize,
    max_controls: usize,
    width: usize,
    height: usize,
) -> BinaryMask {
    let mut out = BinaryMask::new(width, height);
    let radius = (thickness.clamp(1, MAX_THICKNESS) / 2) as i64;
    if points.is_empty() {
        return out;
    }
    let ctrl: Vec<(f64, f64)> = subsample_controls(points, max_controls)
        .iter()
        .map(|p| (p.x as f64, p.y as f64))
        .collect();
    if ctrl.len() == 1 {
        stamp(&mut out, ctrl[0].0, ctrl[0].1, radius);
        return out;
    }
    let at = |i: isize| ctrl[i.clamp(0, ctrl.len() as isize - 1) as usize];
    for i in 0..ctrl.len() - 1 {
        let (p0, p1, p2, p3) = (at(i as isize - 1), at(i as isize), at(i as isize + 1), at(i as isize + 2));
        let b0 = p1;
        let b1 = (p1.0 + (p2.0 - p0.0) / 6.0, p1.1 + (p2.1 - p0.1) / 6.0);
        let b2 = (p2.0 - (p3.0 - p1.0) / 6.0, p2.1 - (p3.1 - p1.1) / 6.0);
        let b3 = p2;
        let poly = |a: (f64, f64), b: (f64, f64)| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
        let len = poly(b0, b1) + poly(b1, b2) + poly(b2, b3);
        let n = ((4.0 * len).ceil() as usize).max(2);
        for s in 0..=n {
            let t = s as f64 / n as f64;
            let u = 1.0 - t;
            let x = u * u * u * b0.0 + 3.0 * u * u * t * b1.0 + 3.0 * u * t * t * b2.0 + t * t * t * b3.0;
            let y = u * u * u * b0.1 + 3.0 * u * u * t * b1.1 + 3.0 * u * t * t * b2.1 + t * t * t * b3.1;
            stamp(&mut out, x, y, radius);
        }
    }
    out
}
