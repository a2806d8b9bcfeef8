use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the engine. Each variant maps to a stable string code
/// (see [`Error::code`]) that the service and CLI surface verbatim.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    #[error("invalid dimensions {0}x{1}")]
    InvalidDimensions(usize, usize),

    #[error("mask data must be 0/1 with length width*height")]
    InvalidMaskData,

    #[error("score map contains non-finite values")]
    NonFinite,

    #[error("bilinear resampling is not defined for binary masks")]
    BilinearOnBinary,

    #[error("bounding box of an empty mask")]
    EmptyMaskBbox,

    #[error("degenerate box [{0}, {1}, {2}, {3}]")]
    DegenerateBox(i64, i64, i64, i64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("prediction already matches ground truth")]
    AlreadyPerfect,

    #[error("interaction payload out of bounds: {0}")]
    OutOfBounds(String),

    #[error("could not reach target IoU range [{lo}, {hi}] (best {best:.4})")]
    PerturbUnreachable { lo: f64, hi: f64, best: f64 },

    #[error("defective mask not reachable after {0} restarts")]
    DefectUnreachable(usize),

    #[error("nothing to undo")]
    NothingToUndo,

    #[error(transparent)]
    Backend(#[from] crate::pipeline::BackendError),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(..) => "dimension-mismatch",
            Error::InvalidDimensions(..) => "invalid-dimensions",
            Error::InvalidMaskData => "invalid-mask-data",
            Error::NonFinite => "non-finite",
            Error::BilinearOnBinary => "bilinear-on-binary",
            Error::EmptyMaskBbox => "empty-mask-bbox",
            Error::DegenerateBox(..) => "degenerate-box",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::AlreadyPerfect => "already-perfect",
            Error::OutOfBounds(_) => "out-of-bounds",
            Error::PerturbUnreachable { .. } => "perturb-unreachable",
            Error::DefectUnreachable(_) => "defect-unreachable",
            Error::NothingToUndo => "nothing-to-undo",
            Error::Backend(e) => e.code(),
            Error::Dataset(_) => "dataset",
            Error::Image(_) => "image",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
