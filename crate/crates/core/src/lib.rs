//! Interactive segmentation engine.
//!
//! The crate is organized bottom-up:
//!
//! - [`mask`]: binary masks, score maps, morphology, components, distance
//!   transforms, resampling and mask serialization.
//! - [`crop`]: pixel boxes, box expansion and invertible crop transforms,
//!   including Target-Crop and Focus-Crop selection.
//! - [`superpixel`]: SLIC superpixels in CIELAB.
//! - [`skeleton`]: thinning, radius-neighbor graphs, cycle removal, tree
//!   diameters and Bezier stroke rasterization.
//! - [`interaction`]: click/scribble/box/coarse-mask simulators, defective
//!   mask synthesis and the two-channel interaction encoding.
//! - [`pipeline`]: the per-round crop → segment → refine → merge loop and
//!   the segmenter backends.
//! - [`eval`]: dataset loading, NoC/NoF/NoS/mIoU protocols and reports.

pub mod crop;
pub mod error;
pub mod eval;
pub mod interaction;
pub mod mask;
pub mod pipeline;
pub mod rng;
pub mod skeleton;
pub mod superpixel;

pub use error::{Error, Result};
pub use mask::{iou, xor_diff, BinaryMask, Pixel, ScoreMap};
