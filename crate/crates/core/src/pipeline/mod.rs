//! The interactive round loop.
//!
//! Each round crops around the previous mask and the new interaction, runs
//! the backend's coarse stage at object resolution, optionally refines the
//! region that changed at detail resolution, and merges the result into the
//! previous mask.

mod backend;
mod geodesic;
mod oracle;
pub mod remote;
mod spec;

pub use backend::{
    BackendError, CoarseRequest, RefineOutput, RefineRequest, SegmenterBackend,
};
pub use geodesic::{geodesic_distance, ClassicalGeodesicBackend, GeodesicParams};
pub use oracle::{DelayOracle, IdentityOracle, NeverOracle, PerfectOracle, ORACLE_LOGIT};
pub use remote::RemoteBackend;
pub use spec::{BackendSpec, DEFAULT_REMOTE_TIMEOUT};

use std::sync::Arc;
use std::time::Instant;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::crop::{select_focus_crop, select_target_crop, CropConfig, CropTransform, PixelBox};
use crate::error::{Error, Result};
use crate::interaction::{encode_bimap, interaction_anchor, BiMap, Interaction};
use crate::mask::{
    largest_component, sigmoid, xor_diff, BinaryMask, Connectivity, Pixel, ResizeMode, ScoreMap,
};

/// Coarse, detail and boundary logits over the same patch.
#[derive(Debug, Clone, PartialEq)]
pub struct RefineBundle {
    pub coarse: ScoreMap,
    pub detail: ScoreMap,
    pub boundary: ScoreMap,
}

impl RefineBundle {
    pub fn new(coarse: ScoreMap, detail: ScoreMap, boundary: ScoreMap) -> Result<Self> {
        for m in [&detail, &boundary] {
            if m.dims() != coarse.dims() {
                return Err(Error::DimensionMismatch(
                    m.width(),
                    m.height(),
                    coarse.width(),
                    coarse.height(),
                ));
            }
        }
        Ok(Self {
            coarse,
            detail,
            boundary,
        })
    }
}

/// Boundary-gated blend: `sigmoid(b) * detail + (1 - sigmoid(b)) * coarse`.
pub fn refine_blend(b: &RefineBundle) -> ScoreMap {
    let (w, h) = b.coarse.dims();
    let data = b
        .boundary
        .data()
        .iter()
        .zip(b.detail.data())
        .zip(b.coarse.data())
        .map(|((&mb, &md), &ml)| {
            let g = sigmoid(mb);
            g * md + (1.0 - g) * ml
        })
        .collect();
    ScoreMap::from_vec(w, h, data).expect("blend of finite maps is finite")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriMap {
    pub fg: BinaryMask,
    pub bg: BinaryMask,
    pub unknown: BinaryMask,
}

/// Confident foreground (or positive input), confident background (or
/// negative input, unless already foreground), and everything else.
pub fn build_trimap(logits: &ScoreMap, bimap: &BiMap, t_lo: f32, t_hi: f32) -> Result<TriMap> {
    if !(t_lo < t_hi) {
        return Err(Error::InvalidParameter(format!(
            "trimap thresholds {t_lo} >= {t_hi}"
        )));
    }
    if bimap.dims() != logits.dims() {
        let (w, h) = bimap.dims();
        return Err(Error::DimensionMismatch(w, h, logits.width(), logits.height()));
    }
    let (w, h) = logits.dims();
    let prob = logits.sigmoid();
    let fg = BinaryMask::from_fn(w, h, |x, y| {
        prob.get(x, y) >= t_hi || bimap.positive.get(x, y)
    });
    let bg = BinaryMask::from_fn(w, h, |x, y| {
        !fg.get(x, y) && (prob.get(x, y) <= t_lo || bimap.negative.get(x, y))
    });
    let unknown = BinaryMask::from_fn(w, h, |x, y| !fg.get(x, y) && !bg.get(x, y));
    Ok(TriMap { fg, bg, unknown })
}

/// Keeps `prev` everywhere except the difference component anchored at
/// `anchor`, which takes the new prediction. Inactive merge passes
/// `new_pred` through.
pub fn progressive_merge(
    prev: &BinaryMask,
    new_pred: &BinaryMask,
    anchor: Pixel,
    active: bool,
) -> Result<BinaryMask> {
    let diff = xor_diff(prev, new_pred)?;
    if !active {
        return Ok(new_pred.clone());
    }
    let update = largest_component(&diff, Connectivity::Eight, Some(anchor));
    let (w, h) = prev.dims();
    Ok(BinaryMask::from_fn(w, h, |x, y| {
        if update.get(x, y) {
            new_pred.get(x, y)
        } else {
            prev.get(x, y)
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub crop: CropConfig,
    /// Round index from which progressive merge is on for scratch sessions.
    pub progressive_active_after: usize,
    pub trimap_lo: f32,
    pub trimap_hi: f32,
    /// Magnitude of the logits the previous mask contributes outside crops.
    pub prior_logit: f32,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            crop: CropConfig::default(),
            progressive_active_after: 10,
            trimap_lo: 0.3,
            trimap_hi: 0.7,
            prior_logit: 10.0,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        self.crop.validate()?;
        if !(0.0 < self.trimap_lo && self.trimap_lo < self.trimap_hi && self.trimap_hi < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "trimap thresholds ({}, {}) must satisfy 0 < lo < hi < 1",
                self.trimap_lo, self.trimap_hi
            )));
        }
        if !(self.prior_logit > 0.0 && self.prior_logit.is_finite()) {
            return Err(Error::InvalidParameter("prior_logit must be positive".into()));
        }
        Ok(())
    }
}

/// One applied round, with the state it replaced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub interaction: Interaction,
    pub mask_before: BinaryMask,
    pub bimap_before: BiMap,
    pub mask: BinaryMask,
    pub target_box: PixelBox,
    pub focus_box: PixelBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub coarse_input: (usize, usize),
    pub refine_input: Option<(usize, usize)>,
    pub coarse_ms: f64,
    pub refine_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundResult {
    pub mask: BinaryMask,
    pub target_box: PixelBox,
    pub focus_box: PixelBox,
    /// Number of rounds applied after this one.
    pub round: usize,
    pub timings: Timings,
}

/// A single annotation session. Rounds mutate it only on success.
#[derive(Debug, Clone)]
pub struct SessionState {
    id: String,
    image: Arc<RgbImage>,
    initial_mask: BinaryMask,
    prev_mask: BinaryMask,
    bimap: BiMap,
    history: Vec<RoundRecord>,
    started_from_mask: bool,
    cfg: SessionConfig,
    context_token: Option<String>,
}

impl SessionState {
    pub fn new(
        id: impl Into<String>,
        image: Arc<RgbImage>,
        initial_mask: Option<BinaryMask>,
        cfg: SessionConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let (w, h) = (image.width() as usize, image.height() as usize);
        if w == 0 || h == 0 {
            return Err(Error::InvalidDimensions(w, h));
        }
        let started_from_mask = initial_mask.is_some();
        let initial = match initial_mask {
            Some(m) => {
                if m.dims() != (w, h) {
                    return Err(Error::DimensionMismatch(m.width(), m.height(), w, h));
                }
                m
            }
            None => BinaryMask::new(w, h),
        };
        Ok(Self {
            id: id.into(),
            image,
            prev_mask: initial.clone(),
            initial_mask: initial,
            bimap: BiMap::empty(w, h),
            history: Vec::new(),
            started_from_mask,
            cfg,
            context_token: None,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn image(&self) -> &Arc<RgbImage> {
        &self.image
    }

    pub fn dims(&self) -> (usize, usize) {
        self.prev_mask.dims()
    }

    pub fn mask(&self) -> &BinaryMask {
        &self.prev_mask
    }

    pub fn initial_mask(&self) -> &BinaryMask {
        &self.initial_mask
    }

    pub fn bimap(&self) -> &BiMap {
        &self.bimap
    }

    pub fn history(&self) -> &[RoundRecord] {
        &self.history
    }

    pub fn round(&self) -> usize {
        self.history.len()
    }

    pub fn started_from_mask(&self) -> bool {
        self.started_from_mask
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    pub fn context_token(&self) -> Option<&str> {
        self.context_token.as_deref()
    }

    pub fn set_context_token(&mut self, token: Option<String>) {
        self.context_token = token;
    }

    pub fn progressive_active(&self) -> bool {
        self.started_from_mask || self.round() >= self.cfg.progressive_active_after
    }

    /// Reverts the last round.
    pub fn undo(&mut self) -> Result<()> {
        let last = self.history.pop().ok_or(Error::NothingToUndo)?;
        self.prev_mask = last.mask_before;
        self.bimap = last.bimap_before;
        Ok(())
    }

    /// Runs one round and commits it only if every stage succeeds.
    pub fn run_round(
        &mut self,
        backend: &dyn SegmenterBackend,
        interaction: &Interaction,
    ) -> Result<RoundResult> {
        let start = Instant::now();
        let (w, h) = self.dims();
        let cfg = self.cfg;
        let own = encode_bimap(interaction, w, h, None)?;
        let acc = encode_bimap(interaction, w, h, Some(&self.bimap))?;
        let anchor = interaction_anchor(interaction, &own);
        let prev = &self.prev_mask;
        let round = self.round();

        // With no previous mask the coarse stage sees the whole frame.
        let target_box = if prev.is_empty() {
            PixelBox::full(w, h)
        } else {
            select_target_crop(prev, &own.union(), &cfg.crop)?
        };
        let tc = CropTransform::new(target_box, cfg.crop.object_size, cfg.crop.object_size)?;
        let image_crop = tc.apply_to_rgb(&self.image)?;
        let bimap_crop = BiMap {
            positive: tc.apply_to_mask(&acc.positive)?,
            negative: tc.apply_to_mask(&acc.negative)?,
        };
        let prev_crop = tc.apply_to_mask(prev)?;
        let t0 = Instant::now();
        let coarse_crop = backend.coarse_segment(&CoarseRequest {
            session: &self.id,
            round,
            image: &image_crop,
            bimap: &bimap_crop,
            prev_mask: &prev_crop,
            transform: tc,
            full_dims: (w, h),
            context_token: self.context_token.as_deref(),
        })?;
        backend::check_dims(&coarse_crop, (tc.target_w, tc.target_h))?;
        let coarse_ms = t0.elapsed().as_secs_f64() * 1e3;

        let mut logits = prev.to_logits(cfg.prior_logit);
        tc.paste_map(&mut logits, &coarse_crop)?;
        let coarse = logits.binarize_logits();
        let focus_box = select_focus_crop(prev, &coarse, anchor, &cfg.crop)?;

        let mut refine_input = None;
        let mut refine_ms = 0.0;
        if backend.supports_refine() {
            let fc = CropTransform::new(focus_box, cfg.crop.detail_size, cfg.crop.detail_size)?;
            let image_patch = fc.apply_to_rgb(&self.image)?;
            let bimap_patch = BiMap {
                positive: fc.apply_to_mask(&acc.positive)?,
                negative: fc.apply_to_mask(&acc.negative)?,
            };
            let coarse_patch = fc.apply_to_map(&logits, ResizeMode::Bilinear)?;
            let trimap = build_trimap(&coarse_patch, &bimap_patch, cfg.trimap_lo, cfg.trimap_hi)?;
            let t1 = Instant::now();
            let out = backend.refine(&RefineRequest {
                session: &self.id,
                round,
                image: &image_patch,
                bimap: &bimap_patch,
                coarse_logits: &coarse_patch,
                trimap: &trimap,
                transform: fc,
                full_dims: (w, h),
                context_token: self.context_token.as_deref(),
            })?;
            refine_ms = t1.elapsed().as_secs_f64() * 1e3;
            backend::check_dims(&out.detail_logits, (fc.target_w, fc.target_h))?;
            backend::check_dims(&out.boundary_logits, (fc.target_w, fc.target_h))?;
            let bundle = RefineBundle::new(coarse_patch, out.detail_logits, out.boundary_logits)?;
            fc.paste_map(&mut logits, &refine_blend(&bundle))?;
            refine_input = Some((fc.target_w, fc.target_h));
        }

        let new_pred = logits.binarize_logits();
        let mask = progressive_merge(prev, &new_pred, anchor, self.progressive_active())?;

        self.history.push(RoundRecord {
            interaction: interaction.clone(),
            mask_before: prev.clone(),
            bimap_before: std::mem::replace(&mut self.bimap, acc),
            mask: mask.clone(),
            target_box,
            focus_box,
        });
        self.prev_mask = mask.clone();
        Ok(RoundResult {
            mask,
            target_box,
            focus_box,
            round: self.round(),
            timings: Timings {
                coarse_input: (tc.target_w, tc.target_h),
                refine_input,
                coarse_ms,
                refine_ms,
                total_ms: start.elapsed().as_secs_f64() * 1e3,
            },
        })
    }
}

#[cfg(test)]
mod tests;
