use super::{BinaryMask, Pixel, ScoreMap};

const INF: i64 = 1 << 40;

/// Exact lower envelope of parabolas (Felzenszwalb & Huttenlocher) in 1-D.
fn envelope_1d(f: &[i64], out: &mut [i64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    let n = f.len();
    v.clear();
    v.resize(n, 0);
    z.clear();
    z.resize(n + 1, 0.0);
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let mut s;
        loop {
            let p = v[k];
            s = ((f[q] + (q * q) as i64) - (f[p] + (p * p) as i64)) as f64
                / (2 * q - 2 * p) as f64;
            if s <= z[k] {
                // z[0] is -inf, so k never underflows
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as i64 - p as i64;
        *o = d * d + f[p];
    }
}

/// Squared Euclidean distance from every foreground pixel to the nearest
/// background pixel, with everything outside the frame counted as
/// background. Background pixels get 0.
pub fn squared_distance_transform(m: &BinaryMask) -> Vec<u64> {
    let (w, h) = m.dims();
    // one pixel of background padding on every side
    let (pw, ph) = (w + 2, h + 2);
    let mut grid = vec![0i64; pw * ph];
    for y in 0..h {
        for x in 0..w {
            if m.get(x, y) {
                grid[(y + 1) * pw + x + 1] = INF;
            }
        }
    }
    let (mut v, mut z) = (Vec::new(), Vec::new());
    let mut col = vec![0i64; ph];
    let mut col_out = vec![0i64; ph];
    for x in 0..pw {
        for y in 0..ph {
            col[y] = grid[y * pw + x];
        }
        envelope_1d(&col, &mut col_out, &mut v, &mut z);
        for y in 0..ph {
            grid[y * pw + x] = col_out[y];
        }
    }
    let mut row_out = vec![0i64; pw];
    let mut out = vec![0u64; w * h];
    for y in 1..ph - 1 {
        envelope_1d(&grid[y * pw..(y + 1) * pw], &mut row_out, &mut v, &mut z);
        for x in 1..pw - 1 {
            out[(y - 1) * w + x - 1] = row_out[x] as u64;
        }
    }
    out
}

pub fn distance_transform(m: &BinaryMask) -> ScoreMap {
    let sq = squared_distance_transform(m);
    ScoreMap::from_vec(
        m.width(),
        m.height(),
        sq.into_iter().map(|d| (d as f64).sqrt() as f32).collect(),
    )
    .expect("distances are finite")
}

/// Deepest foreground pixel (maximal distance to background); ties go to the
/// smallest `(y, x)`. `None` for an empty mask.
pub fn argmax_deepest(m: &BinaryMask) -> Option<Pixel> {
    let sq = squared_distance_transform(m);
    let mut best: Option<(u64, usize)> = None;
    for (i, &d) in sq.iter().enumerate() {
        if d > 0 && best.is_none_or(|(bd, _)| d > bd) {
            best = Some((d, i));
        }
    }
    best.map(|(_, i)| Pixel::new(i % m.width(), i / m.width()))
}
