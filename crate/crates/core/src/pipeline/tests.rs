use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use image::RgbImage;
use proptest::prelude::*;

use super::*;
use crate::interaction::{Click, Polarity};
use crate::mask::iou;

fn const_map(w: usize, h: usize, v: f32) -> ScoreMap {
    ScoreMap::filled(w, h, v)
}

#[test]
fn blend_limits_and_midpoint() {
    let ml = ScoreMap::from_fn(16, 16, |x, y| (x as f32 - 8.0) * 0.7 + y as f32 * 0.1);
    let md = ScoreMap::from_fn(16, 16, |x, y| (y as f32 - 3.0) * 1.3 - x as f32 * 0.2);
    let lo = refine_blend(&RefineBundle::new(ml.clone(), md.clone(), const_map(16, 16, -30.0)).unwrap());
    let hi = refine_blend(&RefineBundle::new(ml.clone(), md.clone(), const_map(16, 16, 30.0)).unwrap());
    for i in 0..256 {
        assert!((lo.data()[i] - ml.data()[i]).abs() <= 1e-6 * ml.data()[i].abs().max(1.0) * 10.0);
        assert!((hi.data()[i] - md.data()[i]).abs() <= 1e-6 * md.data()[i].abs().max(1.0) * 10.0);
    }
    let mid = refine_blend(
        &RefineBundle::new(const_map(4, 4, 0.0), const_map(4, 4, 2.0), const_map(4, 4, 0.0)).unwrap(),
    );
    assert!(mid.data().iter().all(|&v| (v - 1.0).abs() <= 1e-6));
    assert!(RefineBundle::new(const_map(4, 4, 0.0), const_map(4, 3, 0.0), const_map(4, 4, 0.0)).is_err());
}

#[test]
fn trimap_limits() {
    let b = BiMap::empty(5, 5);
    let t = build_trimap(&const_map(5, 5, 30.0), &b, 0.3, 0.7).unwrap();
    assert_eq!(t.fg.count(), 25);
    let t = build_trimap(&const_map(5, 5, 0.0), &b, 0.3, 0.7).unwrap();
    assert_eq!(t.unknown.count(), 25);
    assert!(build_trimap(&const_map(5, 5, 0.0), &b, 0.7, 0.3).is_err());
}

#[test]
fn trimap_rule_table() {
    // every combination of (probability zone, positive, negative) on 3x3
    for zone in [-5.0f32, 0.0, 5.0] {
        for pos in [false, true] {
            for neg in [false, true] {
                let mut b = BiMap::empty(3, 3);
                b.positive.set(1, 1, pos);
                b.negative.set(1, 1, neg);
                let t = build_trimap(&const_map(3, 3, zone), &b, 0.3, 0.7).unwrap();
                let expect_fg = zone > 0.0 || pos;
                let expect_bg = !expect_fg && (zone < 0.0 || neg);
                assert_eq!(t.fg.get(1, 1), expect_fg);
                assert_eq!(t.bg.get(1, 1), expect_bg);
                assert_eq!(t.unknown.get(1, 1), !expect_fg && !expect_bg);
                for (x, y) in [(0, 0), (2, 1)] {
                    let n = t.fg.get(x, y) as u8 + t.bg.get(x, y) as u8 + t.unknown.get(x, y) as u8;
                    assert_eq!(n, 1);
                }
            }
        }
    }
}

#[test]
fn merge_cases() {
    let prev = BinaryMask::from_rect(32, 32, 4, 4, 12, 12);
    assert_eq!(progressive_merge(&prev, &prev, Pixel::new(5, 5), true).unwrap(), prev);
    let new = BinaryMask::from_rect(32, 32, 20, 20, 28, 28);
    assert_eq!(progressive_merge(&prev, &new, Pixel::new(22, 22), false).unwrap(), new);
    // hand-edited blob far from the click survives
    let with_blob = prev.or(&BinaryMask::from_rect(32, 32, 24, 2, 30, 6)).unwrap();
    let new = BinaryMask::from_rect(32, 32, 4, 4, 16, 12);
    let merged = progressive_merge(&with_blob, &new, Pixel::new(14, 8), true).unwrap();
    assert_eq!(merged, new.or(&BinaryMask::from_rect(32, 32, 24, 2, 30, 6)).unwrap());
}

fn mask_strategy(n: usize) -> impl Strategy<Value = BinaryMask> {
    proptest::collection::vec(proptest::bool::weighted(0.4), n * n)
        .prop_map(move |v| BinaryMask::from_vec(n, n, v.into_iter().map(u8::from).collect()).unwrap())
}

proptest! {
    #[test]
    fn merge_outside_update_is_prev(
        prev in mask_strategy(24),
        new in mask_strategy(24),
        ax in 0usize..24,
        ay in 0usize..24,
    ) {
        let anchor = Pixel::new(ax, ay);
        let merged = progressive_merge(&prev, &new, anchor, true).unwrap();
        let diff = xor_diff(&prev, &new).unwrap();
        let update = largest_component(&diff, Connectivity::Eight, Some(anchor));
        for y in 0..24 {
            for x in 0..24 {
                let want = if update.get(x, y) { new.get(x, y) } else { prev.get(x, y) };
                prop_assert_eq!(merged.get(x, y), want);
            }
        }
    }
}

fn image_for(gt: &BinaryMask) -> Arc<RgbImage> {
    Arc::new(RgbImage::from_fn(gt.width() as u32, gt.height() as u32, |x, y| {
        if gt.get(x as usize, y as usize) {
            image::Rgb([200, 50, 50])
        } else {
            image::Rgb([40, 70, 180])
        }
    }))
}

fn click(x: usize, y: usize) -> Interaction {
    Interaction::Click(Click::new(x, y, Polarity::Positive))
}

#[test]
fn perfect_oracle_one_round() {
    let gt = BinaryMask::from_fn(48, 40, |x, y| (x as i64 - 20).pow(2) + (y as i64 - 18).pow(2) <= 81);
    let mut s = SessionState::new("a", image_for(&gt), None, SessionConfig::default()).unwrap();
    let r = s.run_round(&PerfectOracle::new(gt.clone()), &click(20, 18)).unwrap();
    assert_eq!(r.mask, gt);
    assert_eq!(r.round, 1);
    assert_eq!(r.timings.coarse_input, (384, 384));
    assert_eq!(r.timings.refine_input, None);
    assert_eq!(r.target_box, PixelBox::full(48, 40));
}

#[test]
fn delay_oracle_reaches_gt_at_round_k() {
    let gt = BinaryMask::from_rect(40, 40, 10, 12, 30, 26);
    let backend = DelayOracle::new(gt.clone(), 3);
    let mut s = SessionState::new("d", image_for(&gt), None, SessionConfig::default()).unwrap();
    for round in 1..=3 {
        let r = s.run_round(&backend, &click(20, 19)).unwrap();
        let v = iou(&r.mask, &gt).unwrap();
        if round < 3 {
            assert!(v < 1.0);
        } else {
            assert_eq!(v, 1.0);
        }
    }
}

#[test]
fn undo_restores_snapshots() {
    let gt = BinaryMask::from_rect(40, 40, 10, 12, 30, 26);
    let backend = ClassicalGeodesicBackend::default();
    let mut s = SessionState::new("u", image_for(&gt), None, SessionConfig::default()).unwrap();
    assert_eq!(s.undo().unwrap_err().code(), "nothing-to-undo");
    s.run_round(&backend, &click(20, 19)).unwrap();
    let after_one = (s.mask().clone(), s.bimap().clone());
    s.run_round(&backend, &Interaction::Click(Click::new(2, 2, Polarity::Negative)))
        .unwrap();
    s.undo().unwrap();
    assert_eq!((s.mask().clone(), s.bimap().clone()), after_one);
    assert_eq!(s.round(), 1);
    s.undo().unwrap();
    assert_eq!(s.mask(), s.initial_mask());
    assert!(s.bimap().is_empty());
    // redo gives the same mask
    let again = s.run_round(&backend, &click(20, 19)).unwrap();
    assert_eq!(again.mask, after_one.0);
}

struct Failing;

impl SegmenterBackend for Failing {
    fn name(&self) -> &str {
        "failing"
    }
    fn coarse_segment(&self, _req: &CoarseRequest<'_>) -> Result<ScoreMap, BackendError> {
        Err(BackendError::Failed("boom".into()))
    }
}

#[test]
fn failed_round_leaves_state_untouched() {
    let gt = BinaryMask::from_rect(32, 32, 8, 8, 20, 20);
    let mut s = SessionState::new("f", image_for(&gt), None, SessionConfig::default()).unwrap();
    s.run_round(&PerfectOracle::new(gt.clone()), &click(12, 12)).unwrap();
    let (mask, bimap, round) = (s.mask().clone(), s.bimap().clone(), s.round());
    let e = s.run_round(&Failing, &click(14, 14)).unwrap_err();
    assert_eq!(e.code(), "backend-failed");
    assert_eq!((s.mask(), s.bimap(), s.round()), (&mask, &bimap, round));
    assert!(s.run_round(&Failing, &click(40, 1)).is_err());
    assert_eq!(s.round(), 1);
}

/// Refining backend: detail = ground truth, boundary gate fully open.
struct Refining {
    gt: BinaryMask,
    refine_calls: AtomicUsize,
}

impl SegmenterBackend for Refining {
    fn name(&self) -> &str {
        "refining"
    }
    fn coarse_segment(&self, req: &CoarseRequest<'_>) -> Result<ScoreMap, BackendError> {
        let (w, h) = req.out_dims();
        Ok(ScoreMap::filled(w, h, -5.0))
    }
    fn supports_refine(&self) -> bool {
        true
    }
    fn refine(&self, req: &RefineRequest<'_>) -> Result<RefineOutput, BackendError> {
        self.refine_calls.fetch_add(1, Ordering::SeqCst);
        let (w, h) = req.out_dims();
        assert_eq!(req.trimap.fg.dims(), (w, h));
        let gt = req.transform.apply_to_mask(&self.gt).unwrap();
        Ok(RefineOutput {
            detail_logits: gt.to_logits(10.0),
            boundary_logits: ScoreMap::filled(w, h, 30.0),
        })
    }
}

#[test]
fn refine_runs_at_detail_size_inside_focus_box() {
    let gt = BinaryMask::from_rect(64, 64, 20, 20, 30, 30);
    let b = Refining {
        gt: gt.clone(),
        refine_calls: AtomicUsize::new(0),
    };
    let mut s = SessionState::new("r", image_for(&gt), None, SessionConfig::default()).unwrap();
    let r = s.run_round(&b, &click(25, 25)).unwrap();
    assert_eq!(r.timings.refine_input, Some((256, 256)));
    assert_eq!(b.refine_calls.load(Ordering::SeqCst), 1);
    // only the focus box can change
    for p in r.mask.pixels() {
        assert!(r.focus_box.contains_pixel(p));
    }
    let inside = gt.and(&r.focus_box.to_mask(64, 64)).unwrap();
    assert_eq!(r.mask, inside);
}

#[test]
fn preexisting_mask_activates_merge() {
    let gt = BinaryMask::from_rect(48, 48, 10, 10, 30, 30);
    let blob = BinaryMask::from_rect(48, 48, 38, 38, 44, 44);
    let initial = BinaryMask::from_rect(48, 48, 10, 10, 24, 30).or(&blob).unwrap();
    let mut s =
        SessionState::new("p", image_for(&gt), Some(initial.clone()), SessionConfig::default()).unwrap();
    assert!(s.progressive_active());
    let r = s.run_round(&PerfectOracle::new(gt.clone()), &click(27, 20)).unwrap();
    // the missing strip is filled, the stray blob is kept
    assert_eq!(r.mask, gt.or(&blob).unwrap());
    let mut scratch = SessionState::new("q", image_for(&gt), None, SessionConfig::default()).unwrap();
    assert!(!scratch.progressive_active());
    for _ in 0..10 {
        scratch.run_round(&NeverOracle, &click(20, 20)).unwrap();
    }
    assert!(scratch.progressive_active());
}

#[test]
fn history_is_deterministic() {
    let gt = BinaryMask::from_fn(40, 40, |x, y| (x as i64 - 18).pow(2) + (y as i64 - 20).pow(2) <= 100);
    let run = || {
        let mut s = SessionState::new("h", image_for(&gt), None, SessionConfig::default()).unwrap();
        let b = ClassicalGeodesicBackend::default();
        s.run_round(&b, &click(18, 20)).unwrap();
        s.run_round(&b, &Interaction::Click(Click::new(2, 37, Polarity::Negative))).unwrap();
        serde_json::to_vec(s.history()).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn out_of_bounds_interaction_rejected() {
    let gt = BinaryMask::from_rect(16, 16, 2, 2, 8, 8);
    let mut s = SessionState::new("o", image_for(&gt), None, SessionConfig::default()).unwrap();
    let e = s.run_round(&PerfectOracle::new(gt), &click(16, 3)).unwrap_err();
    assert_eq!(e.code(), "out-of-bounds");
    assert_eq!(s.round(), 0);
    assert!(SessionState::new("x", Arc::new(RgbImage::new(4, 4)), Some(BinaryMask::new(3, 4)), SessionConfig::default()).is_err());
}
