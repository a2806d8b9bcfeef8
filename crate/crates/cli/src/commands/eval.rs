use anyhow::Result;
use fcxl_core::eval::{
    eval_boxes, eval_coarse, eval_interactive, load_dataset, write_report, BoxConfig, CoarseConfig,
    EvalMode, InteractiveConfig, ReportFormat, StartMode,
};
use fcxl_core::interaction::PerturbLevel;

use super::probe_remote;
use crate::exit::{self, from_core};
use crate::{with_timeout, EvalArgs, Mode, Start};

enum Plan {
    Interactive(InteractiveConfig),
    Boxes(BoxConfig),
    Coarse(CoarseConfig),
}

fn plan(a: &EvalArgs, seed: u64) -> Result<Plan> {
    let config = |e: fcxl_core::Error| exit::coded(exit::CONFIG, e);
    Ok(match a.mode {
        Mode::Clicks | Mode::Scribbles => {
            let cfg = InteractiveConfig {
                mode: if a.mode == Mode::Clicks {
                    EvalMode::Clicks
                } else {
                    EvalMode::Scribbles
                },
                targets: a.targets.clone(),
                cap: a.cap,
                start: match a.start {
                    Start::Scratch => StartMode::Scratch,
                    Start::Initial => StartMode::Initial,
                },
                k_values: a.k.clone(),
                seed,
                ..Default::default()
            };
            cfg.validate().map_err(config)?;
            Plan::Interactive(cfg)
        }
        Mode::Boxes => {
            if !(0.0..=1.0).contains(&a.jitter) {
                return Err(exit::coded(
                    exit::CONFIG,
                    anyhow::anyhow!("--jitter {} outside [0, 1]", a.jitter),
                ));
            }
            Plan::Boxes(BoxConfig {
                jitter: a.jitter,
                seed,
                ..Default::default()
            })
        }
        Mode::Coarse => Plan::Coarse(CoarseConfig {
            levels: a
                .levels
                .iter()
                .map(|&l| PerturbLevel::new(l))
                .collect::<fcxl_core::Result<_>>()
                .map_err(config)?,
            seed,
            ..Default::default()
        }),
    })
}

pub fn run(a: EvalArgs, seed: u64) -> Result<()> {
    let backend = with_timeout(a.backend.clone(), a.remote_timeout)?;
    let plan = plan(&a, seed)?;
    let dataset = load_dataset(&a.dataset).map_err(from_core)?;
    probe_remote(&backend)?;
    tracing::info!(samples = dataset.len(), skipped = dataset.skipped.len(), backend = %backend, "evaluating");

    let report = match &plan {
        Plan::Interactive(cfg) => eval_interactive(&backend, &dataset, cfg),
        Plan::Boxes(cfg) => eval_boxes(&backend, &dataset, cfg),
        Plan::Coarse(cfg) => eval_coarse(&backend, &dataset, cfg),
    }
    .map_err(from_core)?;

    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_report(&report, &a.out, ReportFormat::from_path(&a.out))
        .map_err(|e| exit::coded(1, anyhow::anyhow!("cannot write {}: {e}", a.out.display())))?;
    for (k, v) in &report.aggregates {
        println!("{k}\t{v:.4}");
    }
    tracing::info!(out = %a.out.display(), "report written");
    Ok(())
}
