//! Evaluation reports: per-sample records, aggregate metrics and their JSON
//! and CSV encodings.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::SkippedSample;
use crate::error::{Error, Result};
use crate::mask::io::write_atomic;

pub const REPORT_SCHEMA: &str = "fcxl-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Clicks,
    Scribbles,
    Boxes,
    Coarse,
}

impl EvalMode {
    /// Prefix of the per-target interaction-count aggregates.
    pub fn count_prefix(self) -> &'static str {
        match self {
            EvalMode::Scribbles => "NoS",
            _ => "NoC",
        }
    }
}

impl std::str::FromStr for EvalMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clicks" => Ok(Self::Clicks),
            "scribbles" => Ok(Self::Scribbles),
            "boxes" => Ok(Self::Boxes),
            "coarse" => Ok(Self::Coarse),
            _ => Err(Error::InvalidParameter(format!(
                "unknown mode {s:?}; expected clicks, scribbles, boxes or coarse"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartMode {
    #[default]
    Scratch,
    /// Start from the dataset's initial masks (mask-correction mode).
    Initial,
}

impl std::str::FromStr for StartMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scratch" => Ok(Self::Scratch),
            "initial" | "initial_mask" => Ok(Self::Initial),
            _ => Err(Error::InvalidParameter(format!(
                "unknown start {s:?}; expected scratch or initial"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    /// Perturbation level, for coarse-mask runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<u8>,
    /// IoU of the starting mask (initial or perturbed) when there is one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_iou: Option<f64>,
    /// Interactions needed per target, keyed by target percent; `cap` when
    /// the target was never reached.
    #[serde(default)]
    pub interactions_to_target: BTreeMap<String, usize>,
    pub iou_trajectory: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_at_round: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SampleRecord {
    pub fn new(sample_id: impl Into<String>) -> Self {
        Self {
            sample_id: sample_id.into(),
            level: None,
            input_iou: None,
            interactions_to_target: BTreeMap::new(),
            iou_trajectory: Vec::new(),
            failed_at_round: None,
            error: None,
        }
    }

    /// IoU after `k` interactions, carrying the last value forward past an
    /// early stop and falling back to the starting IoU (or 0).
    pub fn iou_at(&self, k: usize) -> f64 {
        match self.iou_trajectory.len() {
            0 => self.input_iou.unwrap_or(0.0),
            n => self.iou_trajectory[k.min(n) - 1],
        }
    }

    pub fn final_iou(&self) -> f64 {
        self.iou_trajectory
            .last()
            .copied()
            .unwrap_or_else(|| self.input_iou.unwrap_or(0.0))
    }

    pub fn max_iou(&self) -> f64 {
        self.iou_trajectory
            .iter()
            .copied()
            .fold(self.input_iou.unwrap_or(0.0), f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: String,
    pub mode: EvalMode,
    pub backend: String,
    pub seed: u64,
    pub cap: usize,
    /// Target IoUs in percent.
    pub targets: Vec<u32>,
    pub start: StartMode,
    /// Unreached targets count as `cap` interactions in the averages.
    pub failures_counted_as_cap: bool,
    pub aggregates: BTreeMap<String, f64>,
    pub samples: Vec<SampleRecord>,
    pub skipped: Vec<SkippedSample>,
}

impl EvalReport {
    pub fn empty(mode: EvalMode, backend: impl Into<String>, seed: u64) -> Self {
        Self {
            schema: REPORT_SCHEMA.into(),
            mode,
            backend: backend.into(),
            seed,
            cap: 0,
            targets: Vec::new(),
            start: StartMode::Scratch,
            failures_counted_as_cap: true,
            aggregates: BTreeMap::new(),
            samples: Vec::new(),
            skipped: Vec::new(),
        }
    }

    pub fn aggregate(&self, name: &str) -> Option<f64> {
        self.aggregates.get(name).copied()
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut v = serde_json::to_vec_pretty(self)?;
        v.push(b'\n');
        Ok(v)
    }

    /// One header row of aggregate names and one row of values.
    pub fn to_csv(&self) -> String {
        let names: Vec<&str> = self.aggregates.keys().map(String::as_str).collect();
        let values: Vec<String> = self.aggregates.values().map(|v| v.to_string()).collect();
        format!("{}\n{}\n", names.join(","), values.join(","))
    }
}

/// Key used for a target in per-sample maps and aggregate names.
pub fn target_key(percent: u32) -> String {
    percent.to_string()
}

pub fn target_threshold(percent: u32) -> f64 {
    percent as f64 / 100.0
}

/// Mean over samples of the IoU after `k` interactions (last value carried
/// forward after an early stop).
pub fn k_miou(report: &EvalReport, k: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if report.samples.is_empty() {
        return Err(Error::InvalidParameter("report has no samples".into()));
    }
    let sum: f64 = report.samples.iter().map(|r| r.iou_at(k)).sum();
    Ok(sum / report.samples.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl ReportFormat {
    /// CSV for a `.csv` extension, JSON otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => ReportFormat::Csv,
            _ => ReportFormat::Json,
        }
    }
}

pub fn write_report(r: &EvalReport, path: &Path, format: ReportFormat) -> Result<()> {
    let bytes = match format {
        ReportFormat::Json => r.to_json()?,
        ReportFormat::Csv => r.to_csv().into_bytes(),
    };
    write_atomic(path, &bytes)
}

pub fn read_report(path: &Path) -> Result<EvalReport> {
    let r: EvalReport = serde_json::from_slice(&std::fs::read(path)?)?;
    if r.schema != REPORT_SCHEMA {
        return Err(Error::InvalidParameter(format!(
            "unsupported report schema {:?}",
            r.schema
        )));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(traj: &[f64]) -> SampleRecord {
        SampleRecord {
            iou_trajectory: traj.to_vec(),
            ..SampleRecord::new("s")
        }
    }

    #[test]
    fn k_miou_indexing_and_carry() {
        let mut r = EvalReport::empty(EvalMode::Clicks, "x", 0);
        r.samples.push(record(&[0.5, 0.8, 0.9]));
        assert_eq!(k_miou(&r, 2).unwrap(), 0.8);
        assert_eq!(k_miou(&r, 7).unwrap(), 0.9);
        assert!(k_miou(&r, 0).is_err());
        r.samples.push(record(&[0.3]));
        assert!((k_miou(&r, 2).unwrap() - 0.55).abs() < 1e-12);
    }

    #[test]
    fn empty_report_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let r = EvalReport::empty(EvalMode::Boxes, "oracle:never", 9);
        let p = dir.path().join("r.json");
        write_report(&r, &p, ReportFormat::Json).unwrap();
        assert_eq!(read_report(&p).unwrap(), r);
        let c = dir.path().join("r.csv");
        write_report(&r, &c, ReportFormat::Csv).unwrap();
        assert_eq!(std::fs::read_to_string(c).unwrap(), "\n\n");
    }

    #[test]
    fn populated_report_round_trips_exactly() {
        let mut r = EvalReport::empty(EvalMode::Clicks, "classical", 3);
        r.targets = vec![85, 90];
        r.cap = 20;
        let mut s = record(&[0.1, 1.0 / 3.0, 0.912_345_678_901_234_5]);
        s.interactions_to_target.insert("85".into(), 3);
        s.interactions_to_target.insert("90".into(), 3);
        r.samples.push(s);
        r.aggregates.insert("NoC85".into(), 3.0);
        r.aggregates.insert("mIoU".into(), 0.912_345_678_901_234_5);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        write_report(&r, &p, ReportFormat::Json).unwrap();
        assert_eq!(read_report(&p).unwrap(), r);
        assert_eq!(r.to_csv(), "NoC85,mIoU\n3,0.9123456789012345\n");
    }
}
