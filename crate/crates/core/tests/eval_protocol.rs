use std::f64::consts::PI;

use fcxl_core::eval::synthetic::{synthetic_samples, two_tone, Shape};
use fcxl_core::eval::{
    coarse_levels, eval_boxes, eval_coarse, eval_interactive, k_miou, load_dataset,
    provider_fn, read_report, write_dataset, write_report, BoxConfig, CoarseConfig, Dataset,
    EvalMode, InteractiveConfig, ReportFormat, Sample, StartMode,
};
use fcxl_core::interaction::{perturb_mask, PerturbLevel};
use fcxl_core::pipeline::{
    BackendError, BackendSpec, CoarseRequest, PerfectOracle, SegmenterBackend,
};
use fcxl_core::{BinaryMask, ScoreMap};

fn dataset(n: usize) -> Dataset {
    Dataset::from_samples(synthetic_samples(n, 48, 48, 11)).unwrap()
}

fn clicks() -> InteractiveConfig {
    InteractiveConfig::default()
}

#[test]
fn perfect_oracle_needs_one_click() {
    let ds = dataset(6);
    let r = eval_interactive(&BackendSpec::Perfect, &ds, &clicks()).unwrap();
    assert_eq!(r.aggregate("NoC90"), Some(1.0));
    assert_eq!(r.aggregate("NoF90"), Some(0.0));
    assert_eq!(r.aggregate("mIoU"), Some(1.0));
    assert_eq!(k_miou(&r, 1).unwrap(), 1.0);
    assert_eq!(r.samples.len(), 6);
    for s in &r.samples {
        assert_eq!(s.iou_trajectory, vec![1.0]);
    }
}

#[test]
fn delay_oracle_needs_k_clicks() {
    let ds = dataset(4);
    for k in [2, 3, 5] {
        let r = eval_interactive(&BackendSpec::Delay(k), &ds, &clicks()).unwrap();
        assert_eq!(r.aggregate("NoC90"), Some(k as f64), "k={k}");
        assert_eq!(r.aggregate("NoF90"), Some(0.0));
        // carried forward after the early stop
        assert_eq!(k_miou(&r, 20).unwrap(), 1.0);
        assert_eq!(k_miou(&r, 1).unwrap(), 0.0);
    }
}

#[test]
fn never_oracle_fails_everything() {
    let ds = dataset(5);
    let r = eval_interactive(&BackendSpec::Never, &ds, &clicks()).unwrap();
    assert_eq!(r.aggregate("NoC90"), Some(20.0));
    assert_eq!(r.aggregate("NoF90"), Some(5.0));
    assert_eq!(r.aggregate("NoF85"), Some(5.0));
    for s in &r.samples {
        assert_eq!(s.iou_trajectory.len(), 20);
        assert!(s.interactions_to_target.values().all(|&n| n == 20));
    }
}

#[test]
fn targets_select_aggregate_keys() {
    let ds = dataset(2);
    let cfg = InteractiveConfig {
        targets: vec![90],
        ..clicks()
    };
    let r = eval_interactive(&BackendSpec::Perfect, &ds, &cfg).unwrap();
    assert!(r.aggregate("NoC90").is_some());
    assert!(r.aggregates.keys().all(|k| !k.contains("85")));
}

#[test]
fn scribble_mode_reports_nos() {
    let ds = dataset(3);
    let cfg = InteractiveConfig {
        mode: EvalMode::Scribbles,
        ..clicks()
    };
    let r = eval_interactive(&BackendSpec::Delay(2), &ds, &cfg).unwrap();
    assert_eq!(r.aggregate("NoS90"), Some(2.0));
    assert!(r.aggregate("NoC90").is_none());
}

#[test]
fn classical_backend_improves_monotonically_enough() {
    let ds = dataset(4);
    let r = eval_interactive(&BackendSpec::Classical(Default::default()), &ds, &clicks()).unwrap();
    for s in &r.samples {
        let n90 = s.interactions_to_target["90"];
        let n95 = s.interactions_to_target["95"];
        assert!(s.interactions_to_target["85"] <= n90 && n90 <= n95);
        assert!(s.iou_trajectory.len() <= 20);
    }
    let nof = r.aggregate("NoF90").unwrap() as usize;
    let expect = r
        .samples
        .iter()
        .filter(|s| s.interactions_to_target["90"] == 20 && s.max_iou() < 0.9)
        .count();
    assert_eq!(nof, expect);
}

/// Ground truth, or a failure on every round when `fail` is set.
struct FlakyOracle {
    inner: PerfectOracle,
    fail: bool,
}

impl SegmenterBackend for FlakyOracle {
    fn name(&self) -> &str {
        "flaky"
    }
    fn coarse_segment(&self, req: &CoarseRequest<'_>) -> Result<ScoreMap, BackendError> {
        if self.fail {
            return Err(BackendError::Failed("boom".into()));
        }
        self.inner.coarse_segment(req)
    }
}

#[test]
fn failed_sample_does_not_abort_the_run() {
    let ds = dataset(4);
    let bad = ds.samples[1].id.clone();
    let provider = provider_fn("flaky", |s: &Sample| {
        Box::new(FlakyOracle {
            inner: PerfectOracle::new(s.gt.clone()),
            fail: s.id == bad,
        }) as Box<dyn SegmenterBackend>
    });
    let r = eval_interactive(&provider, &ds, &clicks()).unwrap();
    let rec = r.samples.iter().find(|s| s.sample_id == bad).unwrap();
    assert_eq!(rec.failed_at_round, Some(1));
    assert!(rec.error.as_deref().unwrap().starts_with("backend-failed"));
    assert_eq!(rec.interactions_to_target["90"], 20);
    assert_eq!(r.aggregate("NoF90"), Some(1.0));
    assert_eq!(r.aggregate("NoC90"), Some((1.0 * 3.0 + 20.0) / 4.0));
    assert_eq!(r.aggregate("backend_failures"), Some(1.0));
}

#[test]
fn correction_mode_starts_from_initial_masks() {
    let samples: Vec<Sample> = synthetic_samples(3, 48, 48, 2)
        .into_iter()
        .map(|s| {
            let init = perturb_mask(&s.gt, PerturbLevel::new(3).unwrap(), 1).unwrap();
            s.with_initial(init)
        })
        .collect();
    let ds = Dataset::from_samples(samples).unwrap();
    let cfg = InteractiveConfig {
        start: StartMode::Initial,
        ..clicks()
    };
    let r = eval_interactive(&BackendSpec::Delay(3), &ds, &cfg).unwrap();
    for s in &r.samples {
        let input = s.input_iou.unwrap();
        assert!((0.65..=0.70).contains(&input));
        assert_eq!(s.iou_trajectory.len(), 3);
        assert_eq!(s.iou_trajectory[2], 1.0);
        assert_eq!(s.interactions_to_target["90"], 3);
    }
    let missing = dataset(2);
    assert_eq!(
        eval_interactive(&BackendSpec::Perfect, &missing, &cfg).unwrap_err().code(),
        "dataset"
    );
}

#[test]
fn already_good_initial_mask_needs_no_interaction() {
    let s = synthetic_samples(1, 48, 48, 4).remove(0);
    let gt = s.gt.clone();
    let ds = Dataset::from_samples(vec![s.with_initial(gt)]).unwrap();
    let cfg = InteractiveConfig {
        start: StartMode::Initial,
        ..clicks()
    };
    let r = eval_interactive(&BackendSpec::Never, &ds, &cfg).unwrap();
    assert_eq!(r.aggregate("NoC95"), Some(0.0));
    assert!(r.samples[0].iou_trajectory.is_empty());
    assert_eq!(k_miou(&r, 3).unwrap(), 1.0);
}

fn shape_dataset(shapes: &[Shape]) -> Dataset {
    let samples = shapes
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let gt = s.mask(64, 64);
            Sample::new(format!("s{i}"), two_tone(&gt, [200, 30, 30], [20, 20, 160]), gt)
        })
        .collect();
    Dataset::from_samples(samples).unwrap()
}

#[test]
fn boxes_with_perfect_and_identity_oracles() {
    let rects = shape_dataset(&[
        Shape::Rect { x0: 10, y0: 12, x1: 40, y1: 30 },
        Shape::Rect { x0: 3, y0: 3, x1: 61, y1: 50 },
        Shape::Rect { x0: 20, y0: 5, x1: 33, y1: 59 },
    ]);
    let cfg = BoxConfig::default();
    let r = eval_boxes(&BackendSpec::Perfect, &rects, &cfg).unwrap();
    assert_eq!(r.aggregate("mIoU"), Some(1.0));
    let r = eval_boxes(&BackendSpec::Identity, &rects, &cfg).unwrap();
    assert_eq!(r.aggregate("mIoU"), Some(1.0));

    let ellipses = shape_dataset(&[
        // half-integer centers make the raster bounding box exactly 2r wide
        Shape::Ellipse { cx: 31.5, cy: 31.5, rx: 20.0, ry: 14.0 },
        Shape::Ellipse { cx: 30.5, cy: 28.5, rx: 25.0, ry: 25.0 },
        Shape::Ellipse { cx: 32.5, cy: 30.5, rx: 12.0, ry: 22.0 },
    ]);
    let r = eval_boxes(&BackendSpec::Identity, &ellipses, &cfg).unwrap();
    // analytic area ratio of an ellipse to its bounding box
    let miou = r.aggregate("mIoU").unwrap();
    assert!((miou - PI / 4.0).abs() <= 0.01, "{miou}");
    // and the raster ratio, computed independently
    let raster: f64 = ellipses
        .samples
        .iter()
        .map(|s| {
            let b = fcxl_core::crop::bbox_of(&s.gt).unwrap();
            s.gt.count() as f64 / (b.width() * b.height()) as f64
        })
        .sum::<f64>()
        / 3.0;
    assert!((miou - raster).abs() < 1e-9, "{miou} vs {raster}");
}

#[test]
fn coarse_levels_match_bands_and_oracles() {
    let ds = Dataset::from_samples(synthetic_samples(4, 64, 64, 8)).unwrap();
    let cfg = CoarseConfig {
        seed: 3,
        ..Default::default()
    };
    let perfect = eval_coarse(&BackendSpec::Perfect, &ds, &cfg).unwrap();
    let identity = eval_coarse(&BackendSpec::Identity, &ds, &cfg).unwrap();
    let p = coarse_levels(&perfect);
    let id = coarse_levels(&identity);
    assert_eq!(p.len(), 5);
    for (lp, li) in p.iter().zip(&id) {
        assert_eq!(lp.input_miou, li.input_miou);
        if lp.evaluated > 0 {
            assert_eq!(lp.refined_miou, 1.0);
            assert!((li.refined_miou - li.input_miou).abs() < 1e-12, "{li:?}");
        }
    }
    let l3 = p.iter().find(|l| l.level == 3).unwrap();
    assert!(l3.evaluated > 0);
    assert!((0.65..=0.70).contains(&l3.input_miou));
    for r in &perfect.samples {
        let (lo, hi) = PerturbLevel::new(r.level.unwrap()).unwrap().target_iou_range();
        assert!((lo..=hi).contains(&r.input_iou.unwrap()));
    }
}

#[test]
fn reports_are_independent_of_thread_count() {
    let ds = dataset(8);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            eval_interactive(&BackendSpec::Classical(Default::default()), &ds, &clicks())
                .unwrap()
                .to_json()
                .unwrap()
        })
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn disk_round_trip_and_golden_report() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &synthetic_samples(3, 32, 32, 1)).unwrap();
    let ds = load_dataset(dir.path()).unwrap();
    let cfg = InteractiveConfig {
        seed: 7,
        ..clicks()
    };
    let r = eval_interactive(&BackendSpec::Delay(3), &ds, &cfg).unwrap();
    let out = dir.path().join("report.json");
    write_report(&r, &out, ReportFormat::Json).unwrap();
    assert_eq!(read_report(&out).unwrap(), r);
    let bytes = std::fs::read(&out).unwrap();
    let golden = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/delay3_report.json");
    if std::env::var_os("FCXL_BLESS").is_some() {
        std::fs::write(golden, &bytes).unwrap();
    }
    assert_eq!(bytes, std::fs::read(golden).unwrap());
    let csv = dir.path().join("report.csv");
    write_report(&r, &csv, ReportFormat::Csv).unwrap();
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(text.starts_with("NoC85,NoC90,NoC95,NoF85,NoF90,NoF95,backend_failures,k_mIoU@1,k_mIoU@5,mIoU\n"));
}

#[test]
fn empty_dataset_gives_empty_report() {
    let blank = Sample::new("blank", image::RgbImage::new(8, 8), BinaryMask::new(8, 8));
    let ds = Dataset::from_samples(vec![blank]).unwrap();
    let r = eval_interactive(&BackendSpec::Perfect, &ds, &clicks()).unwrap();
    assert!(r.samples.is_empty());
    assert!(r.aggregates.is_empty());
    assert_eq!(r.skipped.len(), 1);
}
