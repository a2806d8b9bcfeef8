use serde::{Deserialize, Serialize};

use super::BinaryMask;

/// Structuring element centered on the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Kernel {
    /// Euclidean disk `dx² + dy² <= r²`.
    Disk { radius: usize },
    /// Axis-aligned rectangle of size `(2*half_w + 1) x (2*half_h + 1)`.
    Rect { half_w: usize, half_h: usize },
}

impl Kernel {
    pub fn disk(radius: usize) -> Self {
        Kernel::Disk { radius }
    }

    pub fn square(half: usize) -> Self {
        Kernel::Rect {
            half_w: half,
            half_h: half,
        }
    }

    /// Horizontal half-extent of the kernel for each row offset `dy`.
    fn spans(&self) -> Vec<(i64, i64)> {
        match *self {
            Kernel::Disk { radius } => {
                let r = radius as i64;
                (-r..=r)
                    .map(|dy| {
                        let mut hw = 0;
                        while (hw + 1) * (hw + 1) + dy * dy <= r * r {
                            hw += 1;
                        }
                        (dy, hw)
                    })
                    .collect()
            }
            Kernel::Rect { half_w, half_h } => (-(half_h as i64)..=half_h as i64)
                .map(|dy| (dy, half_w as i64))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MorphOp {
    Erode,
    Dilate,
}

pub fn morphology(m: &BinaryMask, op: MorphOp, kernel: Kernel) -> BinaryMask {
    match op {
        MorphOp::Erode => erode(m, kernel),
        MorphOp::Dilate => dilate(m, kernel),
    }
}

fn row_prefix(m: &BinaryMask) -> Vec<u32> {
    let (w, h) = m.dims();
    let mut p = vec![0u32; (w + 1) * h];
    for y in 0..h {
        let row = &mut p[y * (w + 1)..(y + 1) * (w + 1)];
        for x in 0..w {
            row[x + 1] = row[x] + m.data()[y * w + x] as u32;
        }
    }
    p
}

/// Minkowski dilation; pixels outside the frame are background.
pub fn dilate(m: &BinaryMask, kernel: Kernel) -> BinaryMask {
    let (w, h) = m.dims();
    let prefix = row_prefix(m);
    let spans = kernel.spans();
    let mut out = BinaryMask::new(w, h);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let hit = spans.iter().any(|&(dy, hw)| {
                let yy = y + dy;
                if yy < 0 || yy >= h as i64 {
                    return false;
                }
                let lo = (x - hw).max(0) as usize;
                let hi = ((x + hw).min(w as i64 - 1) + 1) as usize;
                let row = &prefix[yy as usize * (w + 1)..];
                row[hi] > row[lo]
            });
            if hit {
                out.set(x as usize, y as usize, true);
            }
        }
    }
    out
}

/// Minkowski erosion; pixels outside the frame are background, so the
/// frame border erodes like any other edge.
pub fn erode(m: &BinaryMask, kernel: Kernel) -> BinaryMask {
    let (w, h) = m.dims();
    let prefix = row_prefix(m);
    let spans = kernel.spans();
    let mut out = BinaryMask::new(w, h);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            if !m.get(x as usize, y as usize) {
                continue;
            }
            let keep = spans.iter().all(|&(dy, hw)| {
                let yy = y + dy;
                if yy < 0 || yy >= h as i64 || x - hw < 0 || x + hw >= w as i64 {
                    return false;
                }
                let row = &prefix[yy as usize * (w + 1)..];
                (row[(x + hw + 1) as usize] - row[(x - hw) as usize]) as i64 == 2 * hw + 1
            });
            if keep {
                out.set(x as usize, y as usize, true);
            }
        }
    }
    out
}

/// `dilate(m) ∧ ¬erode(m)` with a square kernel of half-extent `width`.
pub fn boundary_band(m: &BinaryMask, width: usize) -> BinaryMask {
    let k = Kernel::square(width);
    dilate(m, k)
        .and_not(&erode(m, k))
        .expect("morphology preserves dims")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn offsets(k: Kernel) -> Vec<(i64, i64)> {
        let mut v = Vec::new();
        for (dy, hw) in k.spans() {
            for dx in -hw..=hw {
                v.push((dx, dy));
            }
        }
        v
    }

    // set-theoretic oracles
    fn dilate_bf(m: &BinaryMask, k: Kernel) -> BinaryMask {
        let off = offsets(k);
        BinaryMask::from_fn(m.width(), m.height(), |x, y| {
            off.iter()
                .any(|&(dx, dy)| m.get_signed(x as i64 - dx, y as i64 - dy))
        })
    }

    fn erode_bf(m: &BinaryMask, k: Kernel) -> BinaryMask {
        let off = offsets(k);
        BinaryMask::from_fn(m.width(), m.height(), |x, y| {
            off.iter()
                .all(|&(dx, dy)| m.get_signed(x as i64 + dx, y as i64 + dy))
        })
    }

    #[test]
    fn disk_radius_two_has_thirteen_pixels() {
        assert_eq!(offsets(Kernel::disk(2)).len(), 13);
        assert_eq!(offsets(Kernel::disk(1)).len(), 5);
    }

    #[test]
    fn dilate_empty_is_empty() {
        assert!(dilate(&BinaryMask::new(6, 6), Kernel::disk(3)).is_empty());
    }

    #[test]
    fn opening_removes_isolated_pixel() {
        let mut m = BinaryMask::new(7, 7);
        m.set(3, 3, true);
        let k = Kernel::square(1);
        assert!(dilate(&erode(&m, k), k).is_empty());
        assert!(dilate(&erode_bf(&m, k), k).is_empty());
    }

    #[test]
    fn disk_dilation_of_center_is_plus() {
        let mut m = BinaryMask::new(5, 5);
        m.set(2, 2, true);
        let d = dilate(&m, Kernel::disk(1));
        let plus = BinaryMask::from_fn(5, 5, |x, y| {
            (x == 2 && (1..=3).contains(&y)) || (y == 2 && (1..=3).contains(&x))
        });
        assert_eq!(d, plus);
        assert_eq!(d, dilate_bf(&m, Kernel::disk(1)));
    }

    #[test]
    fn boundary_band_cases() {
        assert!(boundary_band(&BinaryMask::new(8, 8), 1).is_empty());
        let full = BinaryMask::full(6, 6);
        let ring = BinaryMask::from_fn(6, 6, |x, y| x == 0 || y == 0 || x == 5 || y == 5);
        assert_eq!(boundary_band(&full, 1), ring);
        let sq = BinaryMask::from_rect(10, 10, 2, 2, 8, 8);
        let expect = BinaryMask::from_fn(10, 10, |x, y| {
            let outer = (1..9).contains(&x) && (1..9).contains(&y);
            let inner = (3..7).contains(&x) && (3..7).contains(&y);
            outer && !inner
        });
        assert_eq!(boundary_band(&sq, 1), expect);
    }

    fn arb_mask() -> impl Strategy<Value = BinaryMask> {
        (1usize..20, 1usize..20).prop_flat_map(|(w, h)| {
            proptest::collection::vec(0u8..2, w * h)
                .prop_map(move |d| BinaryMask::from_vec(w, h, d).unwrap())
        })
    }

    fn arb_kernel() -> impl Strategy<Value = Kernel> {
        prop_oneof![
            (0usize..5).prop_map(Kernel::disk),
            (0usize..4, 0usize..4).prop_map(|(a, b)| Kernel::Rect { half_w: a, half_h: b }),
        ]
    }

    proptest! {
        #[test]
        fn matches_set_oracle(m in arb_mask(), k in arb_kernel()) {
            prop_assert_eq!(dilate(&m, k), dilate_bf(&m, k));
            prop_assert_eq!(erode(&m, k), erode_bf(&m, k));
        }

        #[test]
        fn duality_on_interior_masks(m in arb_mask(), r in 0usize..3) {
            // pad so that nothing within reach of the kernel touches the frame
            let pad = 2 * r + 1;
            let (w, h) = (m.width() + 2 * pad, m.height() + 2 * pad);
            let mut big = BinaryMask::new(w, h);
            big.paste(&m, pad, pad);
            let k = Kernel::disk(r);
            // complement inside the frame; the frame-border convention flips
            // with it, so only compare away from the border
            let lhs = erode(&big, k);
            let rhs = dilate(&big.not(), k).not();
            for y in pad..h - pad {
                for x in pad..w - pad {
                    prop_assert_eq!(lhs.get(x, y), rhs.get(x, y));
                }
            }
        }
    }
}
