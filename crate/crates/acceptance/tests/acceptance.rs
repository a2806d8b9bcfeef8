//! Acceptance suite. Each criterion prints one PASS/FAIL line with its
//! runtime; the process exits nonzero if any criterion fails.
//!
//! Oracles here are written independently of the library: brute-force
//! distance transforms, BFS component labeling, all-pairs path sums.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use image::{Rgb, RgbImage};
use rand::Rng as _;

use fcxl_core::crop::{expand, select_focus_crop, CropConfig, CropTransform, PixelBox};
use fcxl_core::eval::synthetic::{synthetic_samples, two_tone, Shape};
use fcxl_core::eval::{eval_interactive, Dataset, InteractiveConfig, Sample};
use fcxl_core::interaction::{
    eval_click, eval_scribble, perturb_mask, sample_error_type, simulate_defective_mask,
    DefectSpec, ErrorType, EvalScribbleConfig, PerturbLevel, Polarity,
};
use fcxl_core::mask::io::encode_rgb_png;
use fcxl_core::pipeline::{
    progressive_merge, refine_blend, BackendError, BackendSpec, ClassicalGeodesicBackend,
    CoarseRequest, RefineBundle, SegmenterBackend,
};
use fcxl_core::rng::{self, Rng};
use fcxl_core::skeleton::{
    break_cycles, build_radius_graph, longest_path, medial_axis, PathLength, SkeletonGraph,
};
use fcxl_core::superpixel::{slic, SlicParams};
use fcxl_core::{iou, BinaryMask, Pixel, ScoreMap};
use fcxl_service::{ApiError, AppState, BackendFactory, ServiceConfig};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- oracles

/// 8-connected components labeled 1.. in raster order of first pixel.
fn components8(m: &BinaryMask) -> (Vec<u32>, u32) {
    let (w, h) = m.dims();
    let mut lab = vec![0u32; w * h];
    let mut n = 0;
    for start in 0..w * h {
        if lab[start] != 0 || !m.get(start % w, start / w) {
            continue;
        }
        n += 1;
        lab[start] = n;
        let mut q = VecDeque::from([start]);
        while let Some(i) = q.pop_front() {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if lab[j] == 0 && m.get(nx as usize, ny as usize) {
                        lab[j] = n;
                        q.push_back(j);
                    }
                }
            }
        }
    }
    (lab, n)
}

fn label_mask(lab: &[u32], w: usize, h: usize, l: u32) -> BinaryMask {
    BinaryMask::from_fn(w, h, |x, y| lab[y * w + x] == l)
}

/// Largest component, ties to the lowest label.
fn largest_cc(m: &BinaryMask) -> BinaryMask {
    let (w, h) = m.dims();
    let (lab, n) = components8(m);
    let mut area = vec![0usize; n as usize + 1];
    for &l in &lab {
        area[l as usize] += 1;
    }
    let best = (1..=n).max_by_key(|&l| (area[l as usize], std::cmp::Reverse(l)));
    match best {
        Some(l) => label_mask(&lab, w, h, l),
        None => BinaryMask::new(w, h),
    }
}

/// Component containing the anchor, else the nearest one (ties to the lowest
/// label).
fn anchored_cc(m: &BinaryMask, a: Pixel) -> BinaryMask {
    let (w, h) = m.dims();
    let (lab, n) = components8(m);
    if n == 0 {
        return BinaryMask::new(w, h);
    }
    let at = lab[a.y * w + a.x];
    if at != 0 {
        return label_mask(&lab, w, h, at);
    }
    let mut best = (u64::MAX, 0u32);
    for (i, &l) in lab.iter().enumerate() {
        if l == 0 {
            continue;
        }
        let d = ((i % w) as i64 - a.x as i64).pow(2) as u64 + ((i / w) as i64 - a.y as i64).pow(2) as u64;
        if (d, l) < best {
            best = (d, l);
        }
    }
    label_mask(&lab, w, h, best.1)
}

/// O(N^2) deepest pixel: squared distance to the nearest background pixel,
/// the outside of the frame counting as background; ties to smallest (y, x).
fn brute_deepest(m: &BinaryMask) -> Option<Pixel> {
    let (w, h) = (m.width() as i64, m.height() as i64);
    let mut bg = Vec::new();
    for y in -1..=h {
        for x in -1..=w {
            if !m.get_signed(x, y) {
                bg.push((x, y));
            }
        }
    }
    let mut best: Option<(i64, Pixel)> = None;
    for y in 0..h {
        for x in 0..w {
            if !m.get(x as usize, y as usize) {
                continue;
            }
            let d = bg.iter().map(|&(bx, by)| (bx - x).pow(2) + (by - y).pow(2)).min().unwrap();
            if best.is_none_or(|(bd, _)| d > bd) {
                best = Some((d, Pixel::new(x as usize, y as usize)));
            }
        }
    }
    best.map(|(_, p)| p)
}

fn xor(a: &BinaryMask, b: &BinaryMask) -> BinaryMask {
    BinaryMask::from_fn(a.width(), a.height(), |x, y| a.get(x, y) != b.get(x, y))
}

fn bbox(m: &BinaryMask) -> Option<PixelBox> {
    let pts: Vec<Pixel> = m.pixels().collect();
    if pts.is_empty() {
        return None;
    }
    let x0 = pts.iter().map(|p| p.x).min().unwrap();
    let x1 = pts.iter().map(|p| p.x).max().unwrap() + 1;
    let y0 = pts.iter().map(|p| p.y).min().unwrap();
    let y1 = pts.iter().map(|p| p.y).max().unwrap() + 1;
    Some(PixelBox::new(x0, y0, x1, y1).unwrap())
}

// -------------------------------------------------------------- fixtures

/// Union of 1-3 random ellipses and rectangles.
fn random_blobs(r: &mut Rng, w: usize, h: usize) -> BinaryMask {
    let mut m = BinaryMask::new(w, h);
    for _ in 0..r.random_range(1..=3) {
        let shape = if r.random_bool(0.5) {
            Shape::Ellipse {
                cx: r.random_range(0.0..w as f64),
                cy: r.random_range(0.0..h as f64),
                rx: r.random_range(1.0..(w as f64 / 2.5).max(1.5)),
                ry: r.random_range(1.0..(h as f64 / 2.5).max(1.5)),
            }
        } else {
            let x0 = r.random_range(0..w);
            let y0 = r.random_range(0..h);
            Shape::Rect {
                x0,
                y0,
                x1: r.random_range(x0 + 1..=w),
                y1: r.random_range(y0 + 1..=h),
            }
        };
        m.or_assign(&shape.mask(w, h)).unwrap();
    }
    m
}

fn random_noise(r: &mut Rng, w: usize, h: usize, p: f64) -> BinaryMask {
    BinaryMask::from_fn(w, h, |_, _| r.random_bool(p))
}

fn textured_image(r: &mut Rng, w: usize, h: usize) -> RgbImage {
    let blobs = random_blobs(r, w, h);
    let (a, b): ([u8; 3], [u8; 3]) = (r.random(), r.random());
    let gx = r.random_range(0.0..2.0);
    RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let base = if blobs.get(x as usize, y as usize) { a } else { b };
        let shade = (x as f64 * gx) as i32;
        let noise = r.random_range(-12..=12);
        Rgb(base.map(|c| (c as i32 + shade + noise).clamp(0, 255) as u8))
    })
}

/// Two-tone samples with at least `min_area` foreground pixels.
fn gt_fixtures(n: usize, size: usize, seed: u64, min_area: usize) -> Vec<Sample> {
    let mut out = Vec::new();
    let mut k = 0u64;
    while out.len() < n {
        let s = synthetic_samples(1, size, size, seed ^ k).remove(0);
        k += 1;
        if s.gt.count() >= min_area {
            out.push(Sample { id: format!("fx-{:02}", out.len()), ..s });
        }
    }
    out
}

// ------------------------------------------------------------- criteria

fn defect_bounds() -> Outcome {
    let fixtures = gt_fixtures(10, 64, 101, 300);
    let mut runs = 0;
    for s in &fixtures {
        for k in 0..20u64 {
            let spec = DefectSpec {
                seed: rng::derive(k, &s.id),
                ..Default::default()
            };
            let out = simulate_defective_mask(&s.image, &s.gt, &spec)
                .map_err(|e| format!("{} seed {k}: {e}", s.id))?;
            let v = iou(&out.mask, &s.gt).unwrap();
            check((0.75..=0.85).contains(&v), || format!("{} seed {k}: IoU {v}", s.id))?;
            check((out.iou - v).abs() < 1e-12, || format!("reported IoU {} vs {v}", out.iou))?;
            runs += 1;
        }
    }
    let probs = [0.65, 0.25, 0.1];
    let mut r = rng::seeded(2024);
    let mut counts = [0usize; 3];
    for _ in 0..1000 {
        let i = match sample_error_type(&mut r, &probs) {
            ErrorType::Boundary => 0,
            ErrorType::External => 1,
            ErrorType::Internal => 2,
        };
        counts[i] += 1;
    }
    let freq = counts.map(|c| c as f64 / 1000.0);
    for i in 0..3 {
        check((freq[i] - probs[i]).abs() <= 0.05, || format!("frequencies {freq:?}"))?;
    }
    Ok(format!("{runs} runs in [0.75, 0.85]; type frequencies {freq:?}"))
}

fn perturbation_levels() -> Outcome {
    let fixtures = gt_fixtures(10, 64, 202, 300);
    for level in PerturbLevel::ALL {
        let (lo, hi) = level.target_iou_range();
        let mut n = 0;
        for s in &fixtures {
            for k in 0..10u64 {
                let seed = rng::derive(k, &format!("{}/{}", s.id, level.level()));
                let m = perturb_mask(&s.gt, level, seed)
                    .map_err(|e| format!("level {}: {} seed {k}: {e}", level.level(), s.id))?;
                let v = iou(&m, &s.gt).unwrap();
                check((lo..=hi).contains(&v), || {
                    format!("level {}: IoU {v} outside [{lo}, {hi}]", level.level())
                })?;
                n += 1;
            }
        }
        check(n == 100, || format!("level {} produced {n}", level.level()))?;
    }
    Ok("5 levels x 100 outputs, none out of range".into())
}

fn blend_identities() -> Outcome {
    let mut r = rng::seeded(7);
    let map = |r: &mut Rng| ScoreMap::from_fn(256, 256, |_, _| r.random_range(-12.0..12.0));
    let mut worst = 0.0f32;
    for _ in 0..3 {
        let (ml, md) = (map(&mut r), map(&mut r));
        for (mb, expect) in [(30.0, &md), (-30.0, &ml)] {
            let out = refine_blend(
                &RefineBundle::new(ml.clone(), md.clone(), ScoreMap::filled(256, 256, mb)).unwrap(),
            );
            for (a, b) in out.data().iter().zip(expect.data()) {
                worst = worst.max((a - b).abs());
            }
        }
        let mid = refine_blend(
            &RefineBundle::new(ml.clone(), md.clone(), ScoreMap::filled(256, 256, 0.0)).unwrap(),
        );
        for ((o, l), d) in mid.data().iter().zip(ml.data()).zip(md.data()) {
            worst = worst.max((o - (l + d) / 2.0).abs());
        }
    }
    check(worst <= 1e-6, || format!("max deviation {worst}"))?;
    Ok(format!("max deviation {worst:e}"))
}

fn merge_preservation() -> Outcome {
    let mut r = rng::seeded(11);
    for case in 0..1000 {
        let (prev, new) = if case % 2 == 0 {
            (random_blobs(&mut r, 64, 64), random_blobs(&mut r, 64, 64))
        } else {
            (random_noise(&mut r, 64, 64, 0.3), random_noise(&mut r, 64, 64, 0.3))
        };
        let a = Pixel::new(r.random_range(0..64), r.random_range(0..64));
        let out = progressive_merge(&prev, &new, a, true).unwrap();
        let comp = anchored_cc(&xor(&prev, &new), a);
        for y in 0..64 {
            for x in 0..64 {
                let expect = if comp.get(x, y) { new.get(x, y) } else { prev.get(x, y) };
                check(out.get(x, y) == expect, || format!("case {case} pixel ({x}, {y})"))?;
            }
        }
        check(progressive_merge(&prev, &new, a, false).unwrap() == new, || {
            format!("case {case}: inactive merge differs from new")
        })?;
    }
    Ok("1000 triples exact".into())
}

fn brute_longest(g: &SkeletonGraph) -> PathLength {
    let adj = g.adjacency();
    let mut best = PathLength::zero();
    for s in 0..g.vertices.len() {
        let mut stack = vec![(s, usize::MAX, PathLength::zero())];
        while let Some((v, parent, d)) = stack.pop() {
            if d > best {
                best = d.clone();
            }
            for &u in &adj[v] {
                if u != parent {
                    stack.push((u, v, d.plus(g.edge_squared_len(v, u))));
                }
            }
        }
    }
    best
}

fn random_forest(r: &mut Rng) -> SkeletonGraph {
    let n = r.random_range(1..=200);
    let mut seen = std::collections::BTreeSet::new();
    while seen.len() < n {
        seen.insert((r.random_range(0..60usize), r.random_range(0..60usize)));
    }
    let vertices: Vec<Pixel> = seen.into_iter().map(|(y, x)| Pixel::new(x, y)).collect();
    let mut edges = Vec::new();
    for v in 1..n {
        // occasionally leave a vertex as the root of a new tree
        if r.random_bool(0.9) {
            edges.push((r.random_range(0..v), v));
        }
    }
    edges.sort_unstable();
    SkeletonGraph { vertices, edges }
}

fn deterministic_scribble() -> Outcome {
    let mut r = rng::seeded(13);
    let cfg = EvalScribbleConfig::default();
    let mut fixtures = 0;
    let mut graphs = 0;
    while fixtures < 50 {
        let gt = random_blobs(&mut r, 64, 64);
        let pred = random_blobs(&mut r, 64, 64);
        let err = xor(&gt, &pred);
        if err.is_empty() {
            continue;
        }
        fixtures += 1;
        let a = eval_scribble(&gt, &pred, &cfg).map_err(|e| e.to_string())?;
        let b = eval_scribble(&gt, &pred, &cfg).map_err(|e| e.to_string())?;
        check(a.raster.data() == b.raster.data() && a.path == b.path, || {
            format!("fixture {fixtures} not deterministic")
        })?;
        let region = largest_cc(&err);
        let pts: Vec<Pixel> = region.pixels().collect();
        for p in a.raster.pixels() {
            let near = pts.iter().any(|q| {
                (p.x as i64 - q.x as i64).pow(2) + (p.y as i64 - q.y as i64).pow(2) <= 9
            });
            check(near, || format!("fixture {fixtures}: raster pixel {p:?} escapes"))?;
        }
        let g = break_cycles(&build_radius_graph(&medial_axis(&region), cfg.graph_radius));
        if g.vertices.len() <= 200 {
            let lp = longest_path(&g);
            check(lp.length == brute_longest(&g), || format!("fixture {fixtures}: path length"))?;
            graphs += 1;
        }
    }
    for i in 0..50 {
        let g = random_forest(&mut r);
        let lp = longest_path(&g);
        check(lp.length == brute_longest(&g), || format!("forest {i}: path length"))?;
        let mut along = PathLength::zero();
        for w in lp.indices.windows(2) {
            along.add_squared(g.edge_squared_len(w[0], w[1]));
        }
        check(along == lp.length, || format!("forest {i}: path does not sum to its length"))?;
        graphs += 1;
    }
    Ok(format!("50 fixtures byte-identical and contained; {graphs} graphs exact"))
}

fn click_oracle() -> Outcome {
    let mut r = rng::seeded(17);
    let mut checked = 0;
    while checked < 500 {
        let w = r.random_range(1..=64);
        let h = r.random_range(1..=64);
        let (gt, pred) = if r.random_bool(0.5) {
            (random_blobs(&mut r, w, h), random_blobs(&mut r, w, h))
        } else {
            (random_noise(&mut r, w, h, 0.4), random_blobs(&mut r, w, h))
        };
        let err = xor(&gt, &pred);
        let got = eval_click(&gt, &pred);
        checked += 1;
        let Some(expect) = brute_deepest(&largest_cc(&err)) else {
            check(got.is_err(), || "click on a perfect prediction".into())?;
            continue;
        };
        let c = got.map_err(|e| e.to_string())?;
        let polarity = if gt.get(expect.x, expect.y) { Polarity::Positive } else { Polarity::Negative };
        check(c.pixel() == expect && c.polarity == polarity, || {
            format!("{w}x{h}: got {:?} {:?}, expected {expect:?} {polarity:?}", c.pixel(), c.polarity)
        })?;
    }
    Ok("500 masks exact".into())
}

fn protocol_sanity() -> Outcome {
    let ds = Dataset::from_samples(synthetic_samples(20, 48, 48, 31)).map_err(|e| e.to_string())?;
    let cfg = InteractiveConfig::default();
    let run = |spec: BackendSpec| eval_interactive(&spec, &ds, &cfg).map_err(|e| e.to_string());
    let agg = |r: &fcxl_core::eval::EvalReport, k: &str| r.aggregate(k).unwrap_or(f64::NAN);
    let p = run(BackendSpec::Perfect)?;
    check(agg(&p, "NoC90") == 1.0 && agg(&p, "NoF90") == 0.0, || {
        format!("perfect: NoC90 {} NoF90 {}", agg(&p, "NoC90"), agg(&p, "NoF90"))
    })?;
    for k in [2, 3, 5] {
        let d = run(BackendSpec::Delay(k))?;
        check(agg(&d, "NoC90") == k as f64, || format!("delay {k}: NoC90 {}", agg(&d, "NoC90")))?;
    }
    let n = run(BackendSpec::Never)?;
    check(agg(&n, "NoC90") == 20.0 && agg(&n, "NoF90") == 20.0, || {
        format!("never: NoC90 {} NoF90 {}", agg(&n, "NoC90"), agg(&n, "NoF90"))
    })?;
    Ok("perfect 1.0/0, delay k=k, never 20.0/20 on 20 samples".into())
}

fn crop_geometry() -> Outcome {
    // continuous round trip, exhaustive boxes in a 12x12 frame
    let targets = [(5, 7), (12, 12), (16, 9), (30, 30)];
    let mut worst = 0.0f64;
    for y0 in 0..12 {
        for y1 in y0 + 1..=12 {
            for x0 in 0..12 {
                for x1 in x0 + 1..=12 {
                    let b = PixelBox::new(x0, y0, x1, y1).unwrap();
                    for (tw, th) in targets {
                        let t = CropTransform::new(b, tw, th).unwrap();
                        for py in y0..y1 {
                            for px in x0..x1 {
                                let (u, v) = t.apply_to_point(px as f64, py as f64);
                                let (bx, by) = t.invert_point(u, v);
                                worst = worst.max((bx - px as f64).abs()).max((by - py as f64).abs());
                            }
                        }
                    }
                }
            }
        }
    }
    check(worst <= 0.5, || format!("point round trip off by {worst}"))?;
    // raster round trip: a pixel magnified into the crop maps back to itself
    let mut raster_worst = 0.0f64;
    for y0 in 0..8 {
        for y1 in y0 + 1..=8 {
            for x0 in 0..8 {
                for x1 in x0 + 1..=8 {
                    let b = PixelBox::new(x0, y0, x1, y1).unwrap();
                    for (tw, th) in [(8, 8), (13, 11), (24, 24)] {
                        let t = CropTransform::new(b, tw, th).unwrap();
                        for py in y0..y1 {
                            for px in x0..x1 {
                                let mut m = BinaryMask::new(8, 8);
                                m.set(px, py, true);
                                let blob: Vec<Pixel> = t.apply_to_mask(&m).unwrap().pixels().collect();
                                check(!blob.is_empty(), || format!("{b:?}: pixel vanished"))?;
                                let n = blob.len() as f64;
                                let cx = blob.iter().map(|p| p.x as f64 + 0.5).sum::<f64>() / n;
                                let cy = blob.iter().map(|p| p.y as f64 + 0.5).sum::<f64>() / n;
                                let (sx, sy) = t.invert_point(cx, cy);
                                raster_worst = raster_worst
                                    .max((sx - (px as f64 + 0.5)).abs())
                                    .max((sy - (py as f64 + 0.5)).abs());
                            }
                        }
                    }
                }
            }
        }
    }
    check(raster_worst <= 0.5, || format!("raster round trip off by {raster_worst}"))?;
    // centered box: center 50, half-extent 5 * 1.4 = 7
    let e = expand(&PixelBox::new(45, 45, 55, 55).unwrap(), 1.4, 100, 100);
    check(e == PixelBox::new(43, 43, 57, 57).unwrap(), || format!("expand gave {e:?}"))?;
    // focus crop against a composed oracle
    let mut r = rng::seeded(19);
    let cfg = CropConfig::default();
    let mut cases = 0;
    while cases < 100 {
        let prev = random_blobs(&mut r, 48, 48);
        let coarse = random_blobs(&mut r, 48, 48);
        let diff = xor(&prev, &coarse);
        if diff.is_empty() {
            continue;
        }
        let a = Pixel::new(r.random_range(0..48), r.random_range(0..48));
        let expect = expand(&bbox(&anchored_cc(&diff, a)).unwrap(), cfg.r_fc, 48, 48);
        let got = select_focus_crop(&prev, &coarse, a, &cfg).unwrap();
        check(got == expect, || format!("focus case {cases}: {got:?} vs {expect:?}"))?;
        cases += 1;
    }
    Ok(format!("round trip {worst:.1e}/{raster_worst:.3} px; expand exact; 100 focus crops"))
}

fn slic_properties() -> Outcome {
    let mut r = rng::seeded(23);
    let mut worst_ratio = 1.0f64;
    for i in 0..50 {
        let w = r.random_range(64..=96);
        let h = r.random_range(64..=96);
        let n = [40, 80, 150][i % 3];
        let img = textured_image(&mut r, w, h);
        let p = SlicParams::with_segments(n);
        let a = slic(&img, &p).map_err(|e| e.to_string())?;
        let b = slic(&img, &p).map_err(|e| e.to_string())?;
        check(a == b, || format!("image {i}: not deterministic"))?;
        let k = a.region_count;
        let mut seen = vec![false; k as usize + 1];
        for &l in &a.labels {
            check(l >= 1 && l <= k, || format!("image {i}: label {l} outside 1..={k}"))?;
            seen[l as usize] = true;
        }
        check(seen[1..].iter().all(|&s| s), || format!("image {i}: unused label"))?;
        for l in 1..=k {
            let m = a.region_mask(l);
            let start = m.pixels().next().unwrap();
            // 4-connected flood fill must reach every pixel of the segment
            let mut reached = BinaryMask::new(w, h);
            reached.set(start.x, start.y, true);
            let mut q = VecDeque::from([start]);
            while let Some(p) = q.pop_front() {
                let nb = [(0i64, -1i64), (0, 1), (-1, 0), (1, 0)];
                for (dx, dy) in nb {
                    let (x, y) = (p.x as i64 + dx, p.y as i64 + dy);
                    if m.get_signed(x, y) && !reached.get(x as usize, y as usize) {
                        reached.set(x as usize, y as usize, true);
                        q.push_back(Pixel::new(x as usize, y as usize));
                    }
                }
            }
            check(reached == m, || format!("image {i}: segment {l} is not connected"))?;
        }
        let ratio = k as f64 / n as f64;
        if (ratio - 1.0).abs() > (worst_ratio - 1.0).abs() {
            worst_ratio = ratio;
        }
        check((0.8..=1.2).contains(&ratio), || format!("image {i}: {k} segments for {n}"))?;
    }
    Ok(format!("50 images; worst count ratio {worst_ratio:.3}"))
}

fn classical_end_to_end() -> Outcome {
    let ds = Dataset::from_samples(synthetic_samples(10, 64, 64, 41)).map_err(|e| e.to_string())?;
    let cfg = InteractiveConfig {
        targets: vec![90],
        cap: 5,
        ..Default::default()
    };
    let r = eval_interactive(&BackendSpec::Classical(Default::default()), &ds, &cfg)
        .map_err(|e| e.to_string())?;
    let clicks: Vec<usize> = r.samples.iter().map(|s| s.interactions_to_target["90"]).collect();
    for s in &r.samples {
        check(s.max_iou() >= 0.9, || {
            format!("{}: best IoU {:.3} after {:?}", s.sample_id, s.max_iou(), s.iou_trajectory)
        })?;
    }
    Ok(format!("clicks to 0.90: {clicks:?}"))
}

// ------------------------------------------------------------- service

/// A running service on an ephemeral port, stopped on drop.
struct Server {
    base: String,
    // kept alive until the server is dropped
    _rt: tokio::runtime::Runtime,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
}

impl Server {
    fn start(state: AppState) -> Result<Self, String> {
        let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
        let listener = rt
            .block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))
            .map_err(|e| e.to_string())?;
        let addr = listener.local_addr().map_err(|e| e.to_string())?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        rt.spawn(fcxl_service::run(listener, state, async {
            let _ = rx.await;
        }));
        Ok(Self {
            base: format!("http://{addr}"),
            _rt: rt,
            stop: Some(tx),
        })
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
    }
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .build()
        .into()
}

fn http(req: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Result<(u16, Vec<u8>), String> {
    let mut resp = req.map_err(|e| e.to_string())?;
    let status = resp.status().as_u16();
    let version = resp.headers().get("x-fcxl-version").cloned();
    check(version.as_ref().map(|v| v.as_bytes()) == Some(b"fcxl/1"), || {
        format!("status {status} without the version header")
    })?;
    let body = resp.body_mut().read_to_vec().map_err(|e| e.to_string())?;
    Ok((status, body))
}

fn service_image() -> Vec<u8> {
    let gt = Shape::Ellipse { cx: 47.5, cy: 39.5, rx: 24.0, ry: 18.0 }.mask(96, 80);
    encode_rgb_png(&two_tone(&gt, [200, 40, 40], [30, 60, 200]))
}

fn create_session(a: &ureq::Agent, base: &str) -> Result<String, String> {
    let boundary = "acceptance";
    let mut body = format!(
        "--{boundary}\r\nContent-Disposition: form-data; name=\"image\"; filename=\"i.png\"\r\n\r\n"
    )
    .into_bytes();
    body.extend(service_image());
    body.extend(format!("\r\n--{boundary}--\r\n").into_bytes());
    let (s, b) = http(
        a.post(format!("{base}/v1/sessions"))
            .header("content-type", format!("multipart/form-data; boundary={boundary}"))
            .send(&body[..]),
    )?;
    check(s == 201, || format!("create returned {s}: {}", String::from_utf8_lossy(&b)))?;
    let v: serde_json::Value = serde_json::from_slice(&b).map_err(|e| e.to_string())?;
    Ok(v["id"].as_str().ok_or("no id")?.to_string())
}

fn click(a: &ureq::Agent, base: &str, id: &str, x: usize, y: usize, positive: bool) -> Result<(u16, Vec<u8>), String> {
    let polarity = if positive { "positive" } else { "negative" };
    let json = format!(r#"{{"kind":"click","x":{x},"y":{y},"polarity":"{polarity}"}}"#);
    http(
        a.post(format!("{base}/v1/sessions/{id}/interactions"))
            .header("content-type", "application/json")
            .send(json.as_bytes()),
    )
}

/// create -> 3 clicks -> undo -> re-click; returns the mask payloads.
fn lifecycle() -> Result<Vec<Vec<u8>>, String> {
    let server = Server::start(AppState::new(ServiceConfig::default()))?;
    let (a, base) = (agent(), server.base.clone());
    let id = create_session(&a, &base)?;
    let mut masks = Vec::new();
    let mut keep = |s: u16, b: &[u8], what: &str| -> Result<(), String> {
        check(s == 200, || format!("{what} returned {s}: {}", String::from_utf8_lossy(b)))?;
        let v: serde_json::Value = serde_json::from_slice(b).map_err(|e| e.to_string())?;
        masks.push(serde_json::to_vec(&v["mask_rle"]).map_err(|e| e.to_string())?);
        Ok(())
    };
    for (x, y, p) in [(48, 40, true), (70, 40, true), (10, 10, false)] {
        let (s, b) = click(&a, &base, &id, x, y, p)?;
        keep(s, &b, "click")?;
    }
    let (s, b) = http(a.post(format!("{base}/v1/sessions/{id}/undo")).send_empty())?;
    keep(s, &b, "undo")?;
    let (s, b) = click(&a, &base, &id, 30, 50, true)?;
    keep(s, &b, "re-click")?;
    let (s, png) = http(a.get(format!("{base}/v1/sessions/{id}/mask.png")).call())?;
    check(s == 200, || format!("mask.png returned {s}"))?;
    masks.push(png);
    Ok(masks)
}

struct SlowClassical {
    calls: Arc<AtomicUsize>,
}

impl SegmenterBackend for SlowClassical {
    fn name(&self) -> &str {
        "slow-classical"
    }

    fn coarse_segment(&self, req: &CoarseRequest<'_>) -> Result<ScoreMap, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        std::thread::sleep(Duration::from_millis(400));
        ClassicalGeodesicBackend::new(Default::default()).coarse_segment(req)
    }
}

struct SlowFactory(Arc<AtomicUsize>);

impl BackendFactory for SlowFactory {
    fn create(
        &self,
        _: Option<&str>,
        _: Option<&BinaryMask>,
    ) -> Result<(String, Arc<dyn SegmenterBackend>), ApiError> {
        Ok(("slow-classical".into(), Arc::new(SlowClassical { calls: self.0.clone() })))
    }
}

fn service_contract() -> Outcome {
    let first = lifecycle()?;
    let second = lifecycle()?;
    check(first == second, || "replayed lifecycle produced different mask bytes".into())?;
    // undo restores the round-2 mask exactly
    check(first[3] == first[1], || "undo did not restore the previous round's mask".into())?;
    check(first[4] != first[3], || "re-click did not change the mask".into())?;

    let calls = Arc::new(AtomicUsize::new(0));
    let state = AppState::with_factory(ServiceConfig::default(), Arc::new(SlowFactory(calls.clone())));
    let server = Server::start(state)?;
    let base = server.base.clone();
    let a = agent();
    let id = create_session(&a, &base)?;
    let in_flight = {
        let (a, base, id) = (a.clone(), base.clone(), id.clone());
        std::thread::spawn(move || click(&a, &base, &id, 48, 40, true))
    };
    let t = Instant::now();
    while calls.load(Ordering::SeqCst) == 0 {
        check(t.elapsed() < Duration::from_secs(10), || "first round never started".into())?;
        std::thread::sleep(Duration::from_millis(2));
    }
    let (s, _) = click(&a, &base, &id, 20, 20, true)?;
    check(s == 409, || format!("concurrent round returned {s}, expected 409"))?;
    let (s, b) = in_flight.join().map_err(|_| "client thread panicked")??;
    check(s == 200, || format!("in-flight round returned {s}: {}", String::from_utf8_lossy(&b)))?;
    let (s, b) = http(a.get(format!("{base}/v1/sessions/{id}")).call())?;
    let v: serde_json::Value = serde_json::from_slice(&b).map_err(|e| e.to_string())?;
    check(s == 200 && v["round"] == 1, || format!("session round after 409 is {}", v["round"]))?;
    Ok(format!(
        "{} identical mask payloads across runs; concurrent round rejected with 409",
        first.len()
    ))
}

fn main() {
    let criteria: Vec<(&str, Option<Duration>, fn() -> Outcome)> = vec![
        ("defective-mask IoU bounds and error-type frequencies", Some(Duration::from_secs(60)), defect_bounds),
        ("perturbation levels land in their IoU bands", Some(Duration::from_secs(60)), perturbation_levels),
        ("boundary-gated blend identities", None, blend_identities),
        ("progressive merge preserves prev outside the anchored component", None, merge_preservation),
        ("deterministic, contained evaluation scribbles; exact longest paths", None, deterministic_scribble),
        ("evaluation click equals brute-force deepest error pixel", None, click_oracle),
        ("protocol sanity with perfect, delay and never oracles", Some(Duration::from_secs(30)), protocol_sanity),
        ("crop geometry round trip, expansion and focus crop", None, crop_geometry),
        ("SLIC partition, connectivity, count and determinism", None, slic_properties),
        ("classical backend reaches IoU 0.90 within 5 clicks", Some(Duration::from_secs(30)), classical_end_to_end),
        ("service lifecycle replay is byte-identical; concurrent round gets 409", None, service_contract),
    ];
    let mut failed = 0;
    for (name, budget, run) in criteria {
        let t = Instant::now();
        let mut outcome = run();
        let took = t.elapsed();
        if let (Ok(detail), Some(b)) = (&outcome, budget) {
            if took > b {
                outcome = Err(format!("{detail}; but took {took:.1?} (budget {b:?})"));
            }
        }
        match outcome {
            Ok(detail) => println!("PASS  {name}  [{:.2}s]  {detail}", took.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}  [{:.2}s]  {why}", took.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
