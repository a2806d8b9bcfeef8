use image::RgbImage;

use super::TriMap;
use crate::crop::CropTransform;
use crate::interaction::BiMap;
use crate::mask::{BinaryMask, ScoreMap};

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("remote transport failure: {0}")]
    Transport(String),
    #[error("malformed remote response: {0}")]
    Malformed(String),
    #[error("remote returned {got_w}x{got_h}, expected {want_w}x{want_h}")]
    RemoteDims {
        want_w: usize,
        want_h: usize,
        got_w: usize,
        got_h: usize,
    },
    #[error("remote error {code}: {message}")]
    Remote { code: String, message: String },
    #[error("backend output is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    OutputDims {
        want_w: usize,
        want_h: usize,
        got_w: usize,
        got_h: usize,
    },
    #[error("no seeds: interaction channels and previous mask are all empty")]
    NoSeeds,
    #[error("backend does not implement refine")]
    RefineUnsupported,
    #[error("backend failure: {0}")]
    Failed(String),
}

impl BackendError {
    pub fn code(&self) -> &'static str {
        match self {
            BackendError::Transport(_) => "remote-transport",
            BackendError::Malformed(_) => "remote-malformed",
            BackendError::RemoteDims { .. } => "remote-dim-mismatch",
            BackendError::Remote { .. } => "remote-error",
            BackendError::OutputDims { .. } => "backend-dim-mismatch",
            BackendError::NoSeeds => "no-seeds",
            BackendError::RefineUnsupported => "refine-unsupported",
            BackendError::Failed(_) => "backend-failed",
        }
    }
}

/// Inputs to the coarse stage, already cropped and resized by the pipeline.
#[derive(Debug, Clone, Copy)]
pub struct CoarseRequest<'a> {
    pub session: &'a str,
    pub round: usize,
    pub image: &'a RgbImage,
    pub bimap: &'a BiMap,
    pub prev_mask: &'a BinaryMask,
    /// Maps full-frame coordinates to this crop.
    pub transform: CropTransform,
    pub full_dims: (usize, usize),
    pub context_token: Option<&'a str>,
}

impl CoarseRequest<'_> {
    pub fn out_dims(&self) -> (usize, usize) {
        (self.transform.target_w, self.transform.target_h)
    }
}

/// Inputs to the detail stage for one focus patch.
#[derive(Debug, Clone, Copy)]
pub struct RefineRequest<'a> {
    pub session: &'a str,
    pub round: usize,
    pub image: &'a RgbImage,
    pub bimap: &'a BiMap,
    pub coarse_logits: &'a ScoreMap,
    pub trimap: &'a TriMap,
    pub transform: CropTransform,
    pub full_dims: (usize, usize),
    pub context_token: Option<&'a str>,
}

impl RefineRequest<'_> {
    pub fn out_dims(&self) -> (usize, usize) {
        (self.transform.target_w, self.transform.target_h)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutput {
    pub detail_logits: ScoreMap,
    pub boundary_logits: ScoreMap,
}

/// A segmenter plugged into the round loop.
///
/// Implementations must be deterministic for identical inputs and safe to
/// call concurrently from different sessions.
pub trait SegmenterBackend: Send + Sync {
    fn name(&self) -> &str;

    /// Logits at the request's output resolution.
    fn coarse_segment(&self, req: &CoarseRequest<'_>) -> Result<ScoreMap, BackendError>;

    fn supports_refine(&self) -> bool {
        false
    }

    fn refine(&self, _req: &RefineRequest<'_>) -> Result<RefineOutput, BackendError> {
        Err(BackendError::RefineUnsupported)
    }

    /// Runs once per image; the returned token is passed to later calls.
    fn context_precompute(
        &self,
        _session: &str,
        _image: &RgbImage,
    ) -> Result<Option<String>, BackendError> {
        Ok(None)
    }
}

pub(crate) fn check_dims(
    map: &ScoreMap,
    (want_w, want_h): (usize, usize),
) -> Result<(), BackendError> {
    let (got_w, got_h) = map.dims();
    if (got_w, got_h) != (want_w, want_h) {
        return Err(BackendError::OutputDims {
            want_w,
            want_h,
            got_w,
            got_h,
        });
    }
    Ok(())
}
