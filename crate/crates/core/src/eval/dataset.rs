//! On-disk evaluation datasets.
//!
//! Layout: `root/index.json` lists `{id, image, mask, initial_mask?, video?}`
//! records whose paths are relative to `root` (conventionally under
//! `images/`, `masks/` and `initial_masks/`). Masks are 8-bit PNGs binarized
//! at 128.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::io::{encode_rgb_png, load_mask, load_rgb, save_mask, write_atomic};
use crate::mask::BinaryMask;

pub const INDEX_FILE: &str = "index.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexRecord {
    pub id: String,
    pub image: PathBuf,
    pub mask: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_mask: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video: Option<String>,
}

/// A validated sample held in memory.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub video: Option<String>,
    pub image: Arc<RgbImage>,
    pub gt: BinaryMask,
    pub initial: Option<BinaryMask>,
}

impl Sample {
    pub fn new(id: impl Into<String>, image: RgbImage, gt: BinaryMask) -> Self {
        Self {
            id: id.into(),
            video: None,
            image: Arc::new(image),
            gt,
            initial: None,
        }
    }

    pub fn with_initial(mut self, initial: BinaryMask) -> Self {
        self.initial = Some(initial);
        self
    }

    pub fn with_video(mut self, video: impl Into<String>) -> Self {
        self.video = Some(video.into());
        self
    }

    pub fn dims(&self) -> (usize, usize) {
        self.gt.dims()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedSample {
    pub sample_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<u8>,
    pub reason: String,
}

/// Samples sorted by id, plus the ones rejected by soft validation.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub skipped: Vec<SkippedSample>,
}

impl Dataset {
    /// Validates in-memory samples. Dimension mismatches and duplicate ids
    /// are hard errors; empty ground truth is skipped.
    pub fn from_samples(samples: Vec<Sample>) -> Result<Self> {
        let mut out = Dataset::default();
        let mut seen = std::collections::BTreeSet::new();
        for s in samples {
            if !seen.insert(s.id.clone()) {
                return Err(Error::Dataset(format!("duplicate sample id {:?}", s.id)));
            }
            let img = (s.image.width() as usize, s.image.height() as usize);
            if s.gt.dims() != img {
                return Err(Error::Dataset(format!(
                    "sample {:?}: mask is {}x{} but image is {}x{}",
                    s.id,
                    s.gt.width(),
                    s.gt.height(),
                    img.0,
                    img.1
                )));
            }
            if let Some(init) = &s.initial {
                if init.dims() != img {
                    return Err(Error::Dataset(format!(
                        "sample {:?}: initial mask is {}x{} but image is {}x{}",
                        s.id,
                        init.width(),
                        init.height(),
                        img.0,
                        img.1
                    )));
                }
            }
            if s.gt.is_empty() {
                tracing::warn!(sample = %s.id, "skipping sample with empty ground truth");
                out.skipped.push(SkippedSample {
                    sample_id: s.id,
                    level: None,
                    reason: "empty ground truth".into(),
                });
                continue;
            }
            out.samples.push(s);
        }
        out.samples.sort_by(|a, b| a.id.cmp(&b.id));
        out.skipped.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Sample> {
        self.samples.iter().find(|s| s.id == id)
    }
}

pub fn read_index(root: &Path) -> Result<Vec<IndexRecord>> {
    let path = root.join(INDEX_FILE);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Dataset(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Dataset(format!("malformed {}: {e}", path.display())))
}

/// Loads and validates every sample listed in `root/index.json`.
pub fn load_dataset(root: &Path) -> Result<Dataset> {
    let records = read_index(root)?;
    let mut samples = Vec::with_capacity(records.len());
    for r in records {
        let ctx = |what: &str, p: &Path, e: Error| {
            Error::Dataset(format!("sample {:?}: cannot load {what} {}: {e}", r.id, p.display()))
        };
        let image_path = root.join(&r.image);
        let mask_path = root.join(&r.mask);
        let image = load_rgb(&image_path).map_err(|e| ctx("image", &image_path, e))?;
        let gt = load_mask(&mask_path).map_err(|e| ctx("mask", &mask_path, e))?;
        let initial = match &r.initial_mask {
            Some(p) => {
                let p = root.join(p);
                Some(load_mask(&p).map_err(|e| ctx("initial mask", &p, e))?)
            }
            None => None,
        };
        samples.push(Sample {
            id: r.id.clone(),
            video: r.video.clone(),
            image: Arc::new(image),
            gt,
            initial,
        });
    }
    Dataset::from_samples(samples)
}

/// File-name-safe form of a sample id, used for every per-sample file.
pub fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

/// Writes samples in the standard layout and returns the index records.
pub fn write_dataset(root: &Path, samples: &[Sample]) -> Result<Vec<IndexRecord>> {
    for d in ["images", "masks"] {
        std::fs::create_dir_all(root.join(d))?;
    }
    if samples.iter().any(|s| s.initial.is_some()) {
        std::fs::create_dir_all(root.join("initial_masks"))?;
    }
    let mut records = Vec::with_capacity(samples.len());
    for s in samples {
        let stem = file_stem(&s.id);
        let image = PathBuf::from("images").join(format!("{stem}.png"));
        let mask = PathBuf::from("masks").join(format!("{stem}.png"));
        write_atomic(&root.join(&image), &encode_rgb_png(&s.image))?;
        save_mask(&s.gt, &root.join(&mask))?;
        let initial_mask = match &s.initial {
            Some(m) => {
                let p = PathBuf::from("initial_masks").join(format!("{stem}.png"));
                save_mask(m, &root.join(&p))?;
                Some(p)
            }
            None => None,
        };
        records.push(IndexRecord {
            id: s.id.clone(),
            image,
            mask,
            initial_mask,
            video: s.video.clone(),
        });
    }
    write_index(root, &records)?;
    Ok(records)
}

pub fn write_index(root: &Path, records: &[IndexRecord]) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(records)?;
    bytes.push(b'\n');
    write_atomic(&root.join(INDEX_FILE), &bytes)
}

/// Outcome of [`build_subset`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetSelection {
    pub selected: Vec<String>,
    pub dropped_small: Vec<String>,
}

/// Per video (samples without one form their own group), drops masks below
/// `min_pixels` and then keeps `per_video` frames evenly spaced over the
/// remaining id-sorted frames.
pub fn build_subset(dataset: &Dataset, per_video: usize, min_pixels: usize) -> SubsetSelection {
    let mut groups: BTreeMap<&str, Vec<&Sample>> = BTreeMap::new();
    let mut dropped_small = Vec::new();
    for s in &dataset.samples {
        if s.gt.count() < min_pixels {
            dropped_small.push(s.id.clone());
            continue;
        }
        groups
            .entry(s.video.as_deref().unwrap_or(&s.id))
            .or_default()
            .push(s);
    }
    let mut selected = Vec::new();
    for frames in groups.values() {
        let n = frames.len();
        let k = per_video.min(n);
        if k == 0 {
            continue;
        }
        for i in 0..k {
            // even spacing including both ends
            let idx = if k == 1 { 0 } else { (i * (n - 1) + (k - 1) / 2) / (k - 1) };
            selected.push(frames[idx].id.clone());
        }
    }
    selected.sort();
    SubsetSelection {
        selected,
        dropped_small,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(id: &str, w: usize, h: usize, fg: bool) -> Sample {
        let gt = if fg {
            BinaryMask::from_rect(w, h, 1, 1, w - 1, h - 1)
        } else {
            BinaryMask::new(w, h)
        };
        Sample::new(id, RgbImage::new(w as u32, h as u32), gt)
    }

    #[test]
    fn round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let samples = vec![
            sample("b", 8, 6, true),
            sample("a", 8, 6, true).with_initial(BinaryMask::from_rect(8, 6, 0, 0, 3, 3)),
            sample("c", 5, 5, true).with_video("v1"),
        ];
        write_dataset(dir.path(), &samples).unwrap();
        let ds = load_dataset(dir.path()).unwrap();
        assert_eq!(ds.len(), 3);
        let ids: Vec<_> = ds.samples.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(ds.get("a").unwrap().initial.as_ref().unwrap().count(), 9);
        assert_eq!(ds.get("b").unwrap().gt, samples[0].gt);
        assert_eq!(ds.get("c").unwrap().video.as_deref(), Some("v1"));
    }

    #[test]
    fn empty_ground_truth_is_skipped() {
        let ds = Dataset::from_samples(vec![sample("x", 4, 4, false), sample("y", 4, 4, true)])
            .unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.skipped.len(), 1);
        assert_eq!(ds.skipped[0].sample_id, "x");
    }

    #[test]
    fn dim_mismatch_names_the_sample() {
        let mut s = sample("bad-one", 6, 6, true);
        s.gt = BinaryMask::from_rect(5, 6, 0, 0, 2, 2);
        let e = Dataset::from_samples(vec![s]).unwrap_err();
        assert_eq!(e.code(), "dataset");
        assert!(e.to_string().contains("bad-one"));
    }

    #[test]
    fn missing_file_is_dataset_error() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &[sample("a", 4, 4, true)]).unwrap();
        std::fs::remove_file(dir.path().join("masks/a.png")).unwrap();
        let e = load_dataset(dir.path()).unwrap_err();
        assert_eq!(e.code(), "dataset");
        assert!(e.to_string().contains("\"a\""));
        assert_eq!(load_dataset(&dir.path().join("nope")).unwrap_err().code(), "dataset");
    }

    #[test]
    fn subset_filters_small_and_spreads_frames() {
        let mut samples = Vec::new();
        for i in 0..25 {
            let big = i != 7;
            let gt = if big {
                BinaryMask::from_rect(32, 32, 0, 0, 20, 20)
            } else {
                BinaryMask::from_rect(32, 32, 0, 0, 10, 10)
            };
            samples.push(Sample::new(format!("v1_{i:03}"), RgbImage::new(32, 32), gt).with_video("v1"));
        }
        samples.push(
            Sample::new("v2_000", RgbImage::new(32, 32), BinaryMask::from_rect(32, 32, 0, 0, 20, 20))
                .with_video("v2"),
        );
        let ds = Dataset::from_samples(samples).unwrap();
        let sel = build_subset(&ds, 10, 300);
        assert_eq!(sel.dropped_small, ["v1_007"]);
        assert_eq!(sel.selected.len(), 11);
        assert!(sel.selected.contains(&"v1_000".to_string()));
        assert!(sel.selected.contains(&"v1_024".to_string()));
        assert!(sel.selected.contains(&"v2_000".to_string()));
        assert!(!sel.selected.contains(&"v1_007".to_string()));
    }
}
