//! Ground-truth oracles used to test the round loop and the evaluation
//! protocol without a model.

use super::backend::{BackendError, CoarseRequest, SegmenterBackend};
use crate::mask::{BinaryMask, ScoreMap};

/// Logit magnitude oracles emit.
pub const ORACLE_LOGIT: f32 = 10.0;

fn gt_crop(gt: &BinaryMask, req: &CoarseRequest<'_>) -> Result<ScoreMap, BackendError> {
    if gt.dims() != req.full_dims {
        return Err(BackendError::Failed(format!(
            "oracle ground truth is {}x{}, session image is {}x{}",
            gt.width(),
            gt.height(),
            req.full_dims.0,
            req.full_dims.1
        )));
    }
    let crop = req
        .transform
        .apply_to_mask(gt)
        .map_err(|e| BackendError::Failed(e.to_string()))?;
    Ok(crop.to_logits(ORACLE_LOGIT))
}

/// Returns the ground truth every round.
#[derive(Debug, Clone)]
pub struct PerfectOracle {
    gt: BinaryMask,
}

impl PerfectOracle {
    pub fn new(gt: BinaryMask) -> Self {
        Self { gt }
    }
}

impl SegmenterBackend for PerfectOracle {
    fn name(&self) -> &str {
        "oracle:perfect"
    }

    fn coarse_segment(&self, req: &CoarseRequest<'_>) -> Result<ScoreMap, BackendError> {
        gt_crop(&self.gt, req)
    }
}

/// Predicts nothing until round `k` (1-based), then the ground truth.
#[derive(Debug, Clone)]
pub struct DelayOracle {
    gt: BinaryMask,
    k: usize,
}

impl DelayOracle {
    pub fn new(gt: BinaryMask, k: usize) -> Self {
        Self { gt, k }
    }
}

impl SegmenterBackend for DelayOracle {
    fn name(&self) -> &str {
        "oracle:delay"
    }

    fn coarse_segment(&self, req: &CoarseRequest<'_>) -> Result<ScoreMap, BackendError> {
        if req.round + 1 >= self.k {
            gt_crop(&self.gt, req)
        } else {
            let (w, h) = req.out_dims();
            Ok(ScoreMap::filled(w, h, -ORACLE_LOGIT))
        }
    }
}

/// Always predicts background.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeverOracle;

impl SegmenterBackend for NeverOracle {
    fn name(&self) -> &str {
        "oracle:never"
    }

    fn coarse_segment(&self, req: &CoarseRequest<'_>) -> Result<ScoreMap, BackendError> {
        let (w, h) = req.out_dims();
        Ok(ScoreMap::filled(w, h, -ORACLE_LOGIT))
    }
}

/// Echoes the accumulated positive channel as the prediction, so a box
/// comes back as its rectangle and a coarse mask as itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityOracle;

impl SegmenterBackend for IdentityOracle {
    fn name(&self) -> &str {
        "oracle:identity"
    }

    fn coarse_segment(&self, req: &CoarseRequest<'_>) -> Result<ScoreMap, BackendError> {
        Ok(req.bimap.positive.to_logits(ORACLE_LOGIT))
    }
}
