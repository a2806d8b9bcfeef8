//! Dataset-to-dataset commands. Each writes its outputs plus a
//! `manifest.json` listing per-sample seeds and achieved IoUs; samples that
//! could not be produced are listed under `failures`.

use std::path::Path;

use anyhow::Result;
use fcxl_core::eval::{build_subset, file_stem, load_dataset, write_dataset, Dataset, Sample};
use fcxl_core::interaction::{
    eval_scribble, gen_training_scribble, perturb_mask, simulate_defective_mask, DefectSpec,
    EvalScribbleConfig, PerturbLevel, ScribbleStyle,
};
use fcxl_core::mask::io::{save_mask, write_atomic};
use fcxl_core::{iou, rng, BinaryMask};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::exit::{self, from_core};
use crate::{DefectArgs, PerturbArgs, ScribbleArgs, Style, SubsetArgs};

pub const MANIFEST: &str = "manifest.json";

/// Runs `f` on every sample in parallel, keeping dataset order.
fn per_sample<T: Send>(
    ds: &Dataset,
    f: impl Fn(&Sample) -> fcxl_core::Result<T> + Sync,
) -> (Vec<(&Sample, T)>, Vec<Value>) {
    let results: Vec<_> = ds.samples.par_iter().map(|s| (s, f(s))).collect();
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for (s, r) in results {
        match r {
            Ok(t) => ok.push((s, t)),
            Err(e) => {
                tracing::warn!(sample = %s.id, "{e}");
                failures.push(json!({ "id": s.id, "code": e.code(), "reason": e.to_string() }));
            }
        }
    }
    (ok, failures)
}

fn skipped_json(ds: &Dataset) -> Value {
    serde_json::to_value(&ds.skipped).unwrap_or(Value::Null)
}

fn write_manifest(out: &Path, manifest: Value) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    write_atomic(&out.join(MANIFEST), &bytes).map_err(|e| exit::coded(1, e))
}

/// Exit 0 unless every sample failed.
fn finish(done: usize, total: usize, what: &str) -> Result<()> {
    println!("{done}/{total} samples {what}");
    if done == 0 && total > 0 {
        return Err(exit::coded(1, anyhow::anyhow!("all {total} samples failed")));
    }
    Ok(())
}

fn load(path: &Path, out: &Path) -> Result<Dataset> {
    let ds = load_dataset(path).map_err(from_core)?;
    std::fs::create_dir_all(out).map_err(|e| exit::coded(1, e))?;
    Ok(ds)
}

pub fn defects(a: DefectArgs, seed: u64) -> Result<()> {
    let base = DefectSpec {
        min_iou: a.min_iou,
        max_iou: a.max_iou,
        ..Default::default()
    };
    base.validate().map_err(|e| exit::coded(exit::CONFIG, e))?;
    let ds = load(&a.dataset, &a.out)?;
    let (ok, failures) = per_sample(&ds, |s| {
        let spec = DefectSpec {
            seed: rng::derive(seed, &s.id),
            ..base.clone()
        };
        simulate_defective_mask(&s.image, &s.gt, &spec).map(|o| (spec.seed, o))
    });
    let samples: Vec<Sample> = ok
        .iter()
        .map(|(s, (_, o))| (*s).clone().with_initial(o.mask.clone()))
        .collect();
    write_dataset(&a.out, &samples).map_err(|e| exit::coded(1, e))?;
    let entries: Vec<Value> = ok
        .iter()
        .map(|(s, (sample_seed, o))| {
            json!({
                "id": s.id,
                "seed": sample_seed,
                "iou": o.iou,
                "restarts": o.restarts,
                "error_types": o.trace,
            })
        })
        .collect();
    write_manifest(
        &a.out,
        json!({
            "command": "simulate-defects",
            "seed": seed,
            "params": base,
            "entries": entries,
            "failures": failures,
            "skipped": skipped_json(&ds),
        }),
    )?;
    finish(ok.len(), ds.len(), "simulated")
}

pub fn perturb(a: PerturbArgs, seed: u64) -> Result<()> {
    let level = PerturbLevel::new(a.level).map_err(|e| exit::coded(exit::CONFIG, e))?;
    let ds = load(&a.dataset, &a.out)?;
    let (ok, failures) = per_sample(&ds, |s| {
        let sample_seed = rng::derive(seed, &s.id);
        let m = perturb_mask(&s.gt, level, sample_seed)?;
        let v = iou(&m, &s.gt)?;
        Ok((sample_seed, m, v))
    });
    let samples: Vec<Sample> = ok
        .iter()
        .map(|(s, (_, m, _))| (*s).clone().with_initial(m.clone()))
        .collect();
    write_dataset(&a.out, &samples).map_err(|e| exit::coded(1, e))?;
    let (lo, hi) = level.target_iou_range();
    let entries: Vec<Value> = ok
        .iter()
        .map(|(s, (sample_seed, _, v))| json!({ "id": s.id, "seed": sample_seed, "iou": v }))
        .collect();
    write_manifest(
        &a.out,
        json!({
            "command": "perturb",
            "seed": seed,
            "params": { "level": a.level, "iou_range": [lo, hi] },
            "entries": entries,
            "failures": failures,
            "skipped": skipped_json(&ds),
        }),
    )?;
    finish(ok.len(), ds.len(), "perturbed")
}

pub fn scribbles(a: ScribbleArgs, seed: u64) -> Result<()> {
    let ds = load(&a.dataset, &a.out)?;
    let dir = a.out.join("scribbles");
    std::fs::create_dir_all(&dir).map_err(|e| exit::coded(1, e))?;
    let training = match a.style {
        Style::Bezier => Some(ScribbleStyle::Bezier),
        Style::Axial => Some(ScribbleStyle::Axial),
        Style::Boundary => Some(ScribbleStyle::Boundary),
        Style::Composed => Some(ScribbleStyle::Composed),
        Style::Eval => None,
    };
    let cfg = EvalScribbleConfig::default();
    let (ok, failures) = per_sample(&ds, |s| -> fcxl_core::Result<(BinaryMask, Value)> {
        let file = format!("scribbles/{}.png", file_stem(&s.id));
        match training {
            Some(style) => {
                let sample_seed = rng::derive(seed, &s.id);
                let m = gen_training_scribble(&s.gt, style, sample_seed)?;
                let entry = json!({ "id": s.id, "file": file, "seed": sample_seed, "pixels": m.count() });
                Ok((m, entry))
            }
            None => {
                let empty = BinaryMask::new(s.gt.width(), s.gt.height());
                let pred = s.initial.as_ref().unwrap_or(&empty);
                let sc = eval_scribble(&s.gt, pred, &cfg)?;
                let entry = json!({
                    "id": s.id,
                    "file": file,
                    "pixels": sc.raster.count(),
                    "polarity": sc.polarity,
                    "path": sc.path,
                });
                Ok((sc.raster, entry))
            }
        }
    });
    for (s, (m, _)) in &ok {
        save_mask(m, &dir.join(format!("{}.png", file_stem(&s.id)))).map_err(|e| exit::coded(1, e))?;
    }
    let style = format!("{:?}", a.style).to_lowercase();
    write_manifest(
        &a.out,
        json!({
            "command": "gen-scribbles",
            "seed": seed,
            "params": { "style": style },
            "entries": ok.iter().map(|(_, (_, e))| e.clone()).collect::<Vec<_>>(),
            "failures": failures,
            "skipped": skipped_json(&ds),
        }),
    )?;
    finish(ok.len(), ds.len(), "scribbled")
}

pub fn subset(a: SubsetArgs, seed: u64) -> Result<()> {
    if a.per_video == 0 {
        return Err(exit::coded(exit::CONFIG, anyhow::anyhow!("--per-video must be at least 1")));
    }
    let ds = load(&a.dataset, &a.out)?;
    let sel = build_subset(&ds, a.per_video, a.min_pixels);
    let samples: Vec<Sample> = sel
        .selected
        .iter()
        .filter_map(|id| ds.get(id).cloned())
        .collect();
    write_dataset(&a.out, &samples).map_err(|e| exit::coded(1, e))?;
    write_manifest(
        &a.out,
        json!({
            "command": "build-subset",
            "seed": seed,
            "params": { "per_video": a.per_video, "min_pixels": a.min_pixels },
            "selected": sel.selected,
            "dropped_small": sel.dropped_small,
            "skipped": skipped_json(&ds),
        }),
    )?;
    println!(
        "{} selected, {} dropped below {} px",
        sel.selected.len(),
        sel.dropped_small.len(),
        a.min_pixels
    );
    Ok(())
}
