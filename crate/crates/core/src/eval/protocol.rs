//! Evaluation loops: interactive (clicks or scribbles until a target IoU or
//! the cap), single-shot boxes, and leveled coarse-mask refinement.
//!
//! Samples run in parallel on the current rayon pool. Every record depends
//! only on its sample and the seed, and records are kept in id order, so the
//! report bytes do not depend on the worker count.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Sample, SkippedSample};
use super::report::{
    k_miou, target_key, target_threshold, EvalMode, EvalReport, SampleRecord, StartMode,
    REPORT_SCHEMA,
};
use crate::error::{Error, Result};
use crate::interaction::{
    eval_click, eval_scribble, perturb_mask, simulate_box, EvalScribbleConfig, Interaction,
    PerturbLevel,
};
use crate::mask::{iou, BinaryMask};
use crate::pipeline::{BackendSpec, SegmenterBackend, SessionConfig, SessionState};
use crate::rng;

/// Hands out a backend per sample; oracles are bound to the sample's ground
/// truth, model-backed providers can return shared clients.
pub trait BackendProvider: Sync {
    fn label(&self) -> String;
    fn backend_for(&self, sample: &Sample) -> Result<Box<dyn SegmenterBackend>>;
}

impl BackendProvider for BackendSpec {
    fn label(&self) -> String {
        self.to_string()
    }

    fn backend_for(&self, sample: &Sample) -> Result<Box<dyn SegmenterBackend>> {
        self.build(Some(&sample.gt))
    }
}

/// Adapts a closure into a [`BackendProvider`].
pub struct FnProvider<F> {
    label: String,
    make: F,
}

pub fn provider_fn<F>(label: impl Into<String>, make: F) -> FnProvider<F>
where
    F: Fn(&Sample) -> Box<dyn SegmenterBackend> + Sync,
{
    FnProvider {
        label: label.into(),
        make,
    }
}

impl<F> BackendProvider for FnProvider<F>
where
    F: Fn(&Sample) -> Box<dyn SegmenterBackend> + Sync,
{
    fn label(&self) -> String {
        self.label.clone()
    }

    fn backend_for(&self, sample: &Sample) -> Result<Box<dyn SegmenterBackend>> {
        Ok((self.make)(sample))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InteractiveConfig {
    /// `Clicks` or `Scribbles`.
    pub mode: EvalMode,
    /// Target IoUs in percent.
    pub targets: Vec<u32>,
    pub cap: usize,
    pub start: StartMode,
    /// Interaction counts at which the mean IoU is reported.
    pub k_values: Vec<usize>,
    pub seed: u64,
    pub session: SessionConfig,
    pub scribble: EvalScribbleConfig,
}

impl Default for InteractiveConfig {
    fn default() -> Self {
        Self {
            mode: EvalMode::Clicks,
            targets: vec![85, 90, 95],
            cap: 20,
            start: StartMode::Scratch,
            k_values: vec![1, 5],
            seed: 0,
            session: SessionConfig::default(),
            scribble: EvalScribbleConfig::default(),
        }
    }
}

impl InteractiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.mode, EvalMode::Clicks | EvalMode::Scribbles) {
            return Err(Error::InvalidParameter(format!(
                "interactive evaluation runs clicks or scribbles, not {:?}",
                self.mode
            )));
        }
        if self.targets.is_empty() || self.targets.iter().any(|&t| t == 0 || t > 100) {
            return Err(Error::InvalidParameter(
                "targets must be a nonempty list of percentages in 1..=100".into(),
            ));
        }
        if self.cap == 0 {
            return Err(Error::InvalidParameter("cap must be at least 1".into()));
        }
        if self.k_values.contains(&0) {
            return Err(Error::InvalidParameter("k values must be at least 1".into()));
        }
        self.session.validate()
    }

    fn sorted_targets(&self) -> Vec<u32> {
        let mut t = self.targets.clone();
        t.sort_unstable();
        t.dedup();
        t
    }
}

fn failure_text(e: &Error) -> String {
    format!("{}: {e}", e.code())
}

fn next_interaction(cfg: &InteractiveConfig, gt: &BinaryMask, session: &SessionState) -> Result<Interaction> {
    let pred = session.mask();
    match cfg.mode {
        EvalMode::Scribbles => {
            let s = eval_scribble(gt, pred, &cfg.scribble)?;
            Ok(match s.path {
                Some(path) => Interaction::Scribble {
                    path,
                    polarity: s.polarity,
                },
                // region too small for a stroke: fall back to a click at
                // its deepest point, which renders the same disk
                None => Interaction::Click(eval_click(gt, pred)?),
            })
        }
        _ => {
            let mut c = eval_click(gt, pred)?;
            c.round = session.round();
            Ok(Interaction::Click(c))
        }
    }
}

fn interactive_sample(
    provider: &dyn BackendProvider,
    sample: &Sample,
    cfg: &InteractiveConfig,
    targets: &[u32],
) -> Result<SampleRecord> {
    let backend = provider.backend_for(sample)?;
    let mut rec = SampleRecord::new(&sample.id);
    let initial = match cfg.start {
        StartMode::Scratch => None,
        StartMode::Initial => Some(sample.initial.clone().ok_or_else(|| {
            Error::Dataset(format!("sample {:?} has no initial mask", sample.id))
        })?),
    };
    let mut session =
        SessionState::new(sample.id.clone(), sample.image.clone(), initial, cfg.session)?;
    let gt = &sample.gt;
    let mut current = iou(session.mask(), gt)?;
    if cfg.start == StartMode::Initial {
        rec.input_iou = Some(current);
    }
    let mut reached: BTreeMap<u32, usize> = BTreeMap::new();
    let mark = |reached: &mut BTreeMap<u32, usize>, value: f64, count: usize| {
        for &t in targets {
            if value >= target_threshold(t) {
                reached.entry(t).or_insert(count);
            }
        }
    };
    mark(&mut reached, current, 0);
    let top = target_threshold(*targets.last().expect("validated nonempty"));

    match backend.context_precompute(&sample.id, &sample.image) {
        Ok(token) => session.set_context_token(token),
        Err(e) => {
            rec.failed_at_round = Some(1);
            rec.error = Some(failure_text(&Error::Backend(e)));
        }
    }
    while rec.error.is_none() && current < top && session.round() < cfg.cap {
        let round = session.round() + 1;
        let step = next_interaction(cfg, gt, &session)
            .and_then(|i| session.run_round(backend.as_ref(), &i));
        match step {
            Ok(_) => {}
            Err(Error::AlreadyPerfect) => break,
            Err(e) => {
                tracing::warn!(sample = %sample.id, round, error = %e, "sample failed");
                rec.failed_at_round = Some(round);
                rec.error = Some(failure_text(&e));
                break;
            }
        }
        current = iou(session.mask(), gt)?;
        rec.iou_trajectory.push(current);
        mark(&mut reached, current, round);
    }
    for &t in targets {
        let n = reached.get(&t).copied().unwrap_or(cfg.cap);
        rec.interactions_to_target.insert(target_key(t), n);
    }
    Ok(rec)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Aggregates over the records of an interactive run: mean interactions per
/// target (unreached targets count as the cap), failure counts, final mIoU
/// and the mean IoU at each `k`.
fn interactive_aggregates(
    report: &EvalReport,
    k_values: &[usize],
) -> Result<BTreeMap<String, f64>> {
    let mut agg = BTreeMap::new();
    let recs = &report.samples;
    if recs.is_empty() {
        return Ok(agg);
    }
    let prefix = report.mode.count_prefix();
    for &t in &report.targets {
        let key = target_key(t);
        let counts = recs.iter().map(|r| r.interactions_to_target[&key] as f64);
        agg.insert(format!("{prefix}{t}"), mean(counts));
        let failures = recs
            .iter()
            .filter(|r| {
                r.interactions_to_target[&key] == report.cap && r.max_iou() < target_threshold(t)
            })
            .count();
        agg.insert(format!("NoF{t}"), failures as f64);
    }
    agg.insert("mIoU".into(), mean(recs.iter().map(SampleRecord::final_iou)));
    for &k in k_values {
        agg.insert(format!("k_mIoU@{k}"), k_miou(report, k)?);
    }
    let failed = recs.iter().filter(|r| r.error.is_some()).count();
    agg.insert("backend_failures".into(), failed as f64);
    Ok(agg)
}

/// Runs the click or scribble protocol on every sample.
pub fn eval_interactive(
    provider: &dyn BackendProvider,
    dataset: &Dataset,
    cfg: &InteractiveConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    if cfg.start == StartMode::Initial {
        if let Some(s) = dataset.samples.iter().find(|s| s.initial.is_none()) {
            return Err(Error::Dataset(format!(
                "sample {:?} has no initial mask but start is initial",
                s.id
            )));
        }
    }
    let targets = cfg.sorted_targets();
    let samples: Vec<SampleRecord> = dataset
        .samples
        .par_iter()
        .map(|s| interactive_sample(provider, s, cfg, &targets))
        .collect::<Result<_>>()?;
    let mut report = EvalReport {
        schema: REPORT_SCHEMA.into(),
        mode: cfg.mode,
        backend: provider.label(),
        seed: cfg.seed,
        cap: cfg.cap,
        targets,
        start: cfg.start,
        failures_counted_as_cap: true,
        aggregates: BTreeMap::new(),
        samples,
        skipped: dataset.skipped.clone(),
    };
    report.aggregates = interactive_aggregates(&report, &cfg.k_values)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoxConfig {
    /// Per-side jitter as a fraction of the box extent.
    pub jitter: f64,
    pub seed: u64,
    pub session: SessionConfig,
}

impl Default for BoxConfig {
    fn default() -> Self {
        Self {
            jitter: 0.0,
            seed: 0,
            session: SessionConfig::default(),
        }
    }
}

fn single_round(
    backend: &dyn SegmenterBackend,
    sample: &Sample,
    session_cfg: SessionConfig,
    interaction: &Interaction,
    rec: &mut SampleRecord,
) -> Result<()> {
    let mut session = SessionState::new(sample.id.clone(), sample.image.clone(), None, session_cfg)?;
    let outcome = backend
        .context_precompute(&sample.id, &sample.image)
        .map_err(Error::from)
        .and_then(|token| {
            session.set_context_token(token);
            session.run_round(backend, interaction)
        });
    match outcome {
        Ok(_) => rec.iou_trajectory.push(iou(session.mask(), &sample.gt)?),
        Err(e) => {
            tracing::warn!(sample = %sample.id, error = %e, "sample failed");
            rec.failed_at_round = Some(1);
            rec.error = Some(failure_text(&e));
        }
    }
    Ok(())
}

/// One simulated box and one round per sample. Failed samples score 0.
pub fn eval_boxes(
    provider: &dyn BackendProvider,
    dataset: &Dataset,
    cfg: &BoxConfig,
) -> Result<EvalReport> {
    cfg.session.validate()?;
    if !(0.0..=1.0).contains(&cfg.jitter) {
        return Err(Error::InvalidParameter(format!("box jitter {} outside [0, 1]", cfg.jitter)));
    }
    let samples: Vec<SampleRecord> = dataset
        .samples
        .par_iter()
        .map(|s| {
            let backend = provider.backend_for(s)?;
            let bbox = simulate_box(&s.gt, cfg.jitter, rng::derive(cfg.seed, &s.id))?;
            let mut rec = SampleRecord::new(&s.id);
            single_round(backend.as_ref(), s, cfg.session, &Interaction::Box { bbox }, &mut rec)?;
            Ok(rec)
        })
        .collect::<Result<_>>()?;
    let mut report = EvalReport::empty(EvalMode::Boxes, provider.label(), cfg.seed);
    report.cap = 1;
    report.skipped = dataset.skipped.clone();
    if !samples.is_empty() {
        report.aggregates.insert("mIoU".into(), mean(samples.iter().map(SampleRecord::final_iou)));
        let failed = samples.iter().filter(|r| r.error.is_some()).count();
        report.aggregates.insert("backend_failures".into(), failed as f64);
    }
    report.samples = samples;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoarseConfig {
    pub levels: Vec<PerturbLevel>,
    pub seed: u64,
    pub session: SessionConfig,
}

impl Default for CoarseConfig {
    fn default() -> Self {
        Self {
            levels: PerturbLevel::ALL.to_vec(),
            seed: 0,
            session: SessionConfig::default(),
        }
    }
}

/// Per-level input and refined mean IoU, read back from a coarse report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSummary {
    pub level: u8,
    pub input_miou: f64,
    pub refined_miou: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

/// Perturbs every ground truth at each level and refines it in one round.
/// Samples whose perturbation cannot reach the level's band are skipped.
pub fn eval_coarse(
    provider: &dyn BackendProvider,
    dataset: &Dataset,
    cfg: &CoarseConfig,
) -> Result<EvalReport> {
    cfg.session.validate()?;
    let mut levels = cfg.levels.clone();
    levels.sort_by_key(|l| l.level());
    levels.dedup();
    let jobs: Vec<(&Sample, PerturbLevel)> = dataset
        .samples
        .iter()
        .flat_map(|s| levels.iter().map(move |&l| (s, l)))
        .collect();
    type Outcome = std::result::Result<SampleRecord, SkippedSample>;
    let outcomes: Vec<Outcome> = jobs
        .par_iter()
        .map(|&(s, level)| -> Result<Outcome> {
            let seed = rng::derive(cfg.seed, &format!("{}#L{}", s.id, level.level()));
            let coarse = match perturb_mask(&s.gt, level, seed) {
                Ok(m) => m,
                Err(e) => {
                    return Ok(Err(SkippedSample {
                        sample_id: s.id.clone(),
                        level: Some(level.level()),
                        reason: failure_text(&e),
                    }))
                }
            };
            let mut rec = SampleRecord::new(&s.id);
            rec.level = Some(level.level());
            rec.input_iou = Some(iou(&coarse, &s.gt)?);
            let backend = provider.backend_for(s)?;
            let i = Interaction::CoarseMask { mask: coarse };
            single_round(backend.as_ref(), s, cfg.session, &i, &mut rec)?;
            Ok(Ok(rec))
        })
        .collect::<Result<_>>()?;
    let mut report = EvalReport::empty(EvalMode::Coarse, provider.label(), cfg.seed);
    report.cap = 1;
    report.skipped = dataset.skipped.clone();
    for o in outcomes {
        match o {
            Ok(r) => report.samples.push(r),
            Err(s) => report.skipped.push(s),
        }
    }
    for l in &levels {
        let n = l.level();
        let recs: Vec<&SampleRecord> =
            report.samples.iter().filter(|r| r.level == Some(n)).collect();
        let skipped = report.skipped.iter().filter(|s| s.level == Some(n)).count();
        let agg = &mut report.aggregates;
        agg.insert(format!("L{n}_evaluated"), recs.len() as f64);
        agg.insert(format!("L{n}_skipped"), skipped as f64);
        if !recs.is_empty() {
            let input = mean(recs.iter().map(|r| r.input_iou.unwrap_or(0.0)));
            agg.insert(format!("L{n}_input_mIoU"), input);
            agg.insert(format!("L{n}_refined_mIoU"), mean(recs.iter().map(|r| r.final_iou())));
        }
    }
    Ok(report)
}

pub fn coarse_levels(report: &EvalReport) -> Vec<LevelSummary> {
    let mut levels: Vec<u8> = report
        .samples
        .iter()
        .filter_map(|r| r.level)
        .chain(report.skipped.iter().filter_map(|s| s.level))
        .collect();
    levels.sort_unstable();
    levels.dedup();
    levels
        .into_iter()
        .map(|n| {
            let get = |k: &str| report.aggregate(&format!("L{n}_{k}")).unwrap_or(0.0);
            LevelSummary {
                level: n,
                input_miou: get("input_mIoU"),
                refined_miou: get("refined_mIoU"),
                evaluated: get("evaluated") as usize,
                skipped: get("skipped") as usize,
            }
        })
        .collect()
}
