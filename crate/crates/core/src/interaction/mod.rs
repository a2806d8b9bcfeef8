//! User interactions, their simulators, and the two-channel encoding the
//! segmenter consumes.

mod clicks;
mod defect;
mod perturb;
mod scribble;

pub use clicks::{
    eval_click, gen_training_clicks, sample_click_count, simulate_box, TrainingClickConfig,
};
pub use defect::{sample_error_type, simulate_defective_mask, DefectOutcome, DefectSpec, ErrorType};
pub use perturb::{perturb_mask, PerturbLevel};
pub use scribble::{
    eval_scribble, gen_training_scribble, EvalScribble, EvalScribbleConfig, ScribbleStyle,
};

use serde::{Deserialize, Serialize};

use crate::crop::PixelBox;
use crate::error::{Error, Result};
use crate::mask::{argmax_deepest, BinaryMask, Pixel};
use crate::skeleton::{rasterize_bezier, ScribblePath, MAX_THICKNESS};

/// Radius of the disk a click is rendered as (Euclidean, inclusive: 13 px).
pub const CLICK_RADIUS: i64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Click {
    pub x: usize,
    pub y: usize,
    pub polarity: Polarity,
    #[serde(default)]
    pub round: usize,
}

impl Click {
    pub fn new(x: usize, y: usize, polarity: Polarity) -> Self {
        Self {
            x,
            y,
            polarity,
            round: 0,
        }
    }

    pub fn pixel(&self) -> Pixel {
        Pixel::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Interaction {
    Click(Click),
    Scribble {
        path: ScribblePath,
        polarity: Polarity,
    },
    Box {
        #[serde(rename = "box")]
        bbox: PixelBox,
    },
    CoarseMask {
        mask: BinaryMask,
    },
}

impl Interaction {
    pub fn kind(&self) -> &'static str {
        match self {
            Interaction::Click(_) => "click",
            Interaction::Scribble { .. } => "scribble",
            Interaction::Box { .. } => "box",
            Interaction::CoarseMask { .. } => "coarse_mask",
        }
    }
}

/// Positive and negative interaction channels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiMap {
    pub positive: BinaryMask,
    pub negative: BinaryMask,
}

impl BiMap {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            positive: BinaryMask::new(width, height),
            negative: BinaryMask::new(width, height),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.positive.dims()
    }

    pub fn union(&self) -> BinaryMask {
        self.positive.or(&self.negative).expect("channels share dims")
    }

    pub fn is_empty(&self) -> bool {
        self.positive.is_empty() && self.negative.is_empty()
    }

    pub fn channel_mut(&mut self, polarity: Polarity) -> &mut BinaryMask {
        match polarity {
            Polarity::Positive => &mut self.positive,
            Polarity::Negative => &mut self.negative,
        }
    }
}

/// Disk of radius [`CLICK_RADIUS`] around `p`, clipped to the frame.
pub fn click_disk(p: Pixel, width: usize, height: usize) -> BinaryMask {
    let r = CLICK_RADIUS;
    BinaryMask::from_fn(width, height, |x, y| {
        let dx = x as i64 - p.x as i64;
        let dy = y as i64 - p.y as i64;
        dx * dx + dy * dy <= r * r
    })
}

fn check_scribble(path: &ScribblePath, width: usize, height: usize) -> Result<()> {
    if path.points.len() < 2 {
        return Err(Error::OutOfBounds("scribble needs at least two points".into()));
    }
    if path.thickness == 0 || path.thickness > MAX_THICKNESS {
        return Err(Error::OutOfBounds(format!(
            "scribble thickness {} outside 1..={MAX_THICKNESS}",
            path.thickness
        )));
    }
    if let Some(p) = path.points.iter().find(|p| p.x >= width || p.y >= height) {
        return Err(Error::OutOfBounds(format!(
            "scribble point ({}, {}) outside {width}x{height}",
            p.x, p.y
        )));
    }
    Ok(())
}

/// Renders one interaction into a bi-map, optionally on top of earlier ones.
///
/// Clicks become radius-2 disks on their polarity channel, scribbles are
/// rasterized onto theirs, boxes fill the positive channel, and a coarse
/// mask is taken as the positive channel as-is. Every scribble point is a
/// spline control. Accumulation unions channels.
pub fn encode_bimap(
    i: &Interaction,
    width: usize,
    height: usize,
    accumulate_onto: Option<&BiMap>,
) -> Result<BiMap> {
    let mut out = match accumulate_onto {
        Some(prior) => {
            if prior.dims() != (width, height) {
                let (pw, ph) = prior.dims();
                return Err(Error::DimensionMismatch(pw, ph, width, height));
            }
            prior.clone()
        }
        None => BiMap::empty(width, height),
    };
    match i {
        Interaction::Click(c) => {
            if c.x >= width || c.y >= height {
                return Err(Error::OutOfBounds(format!(
                    "click ({}, {}) outside {width}x{height}",
                    c.x, c.y
                )));
            }
            out.channel_mut(c.polarity)
                .or_assign(&click_disk(c.pixel(), width, height))?;
        }
        Interaction::Scribble { path, polarity } => {
            check_scribble(path, width, height)?;
            let raster =
                rasterize_bezier(&path.points, path.thickness, path.points.len(), width, height);
            out.channel_mut(*polarity).or_assign(&raster)?;
        }
        Interaction::Box { bbox } => {
            if !bbox.within(width, height) {
                return Err(Error::OutOfBounds(format!(
                    "box {:?} outside {width}x{height}",
                    <[usize; 4]>::from(*bbox)
                )));
            }
            out.positive.or_assign(&bbox.to_mask(width, height))?;
        }
        Interaction::CoarseMask { mask } => {
            if mask.dims() != (width, height) {
                return Err(Error::DimensionMismatch(mask.width(), mask.height(), width, height));
            }
            out.positive.or_assign(mask)?;
        }
    }
    Ok(out)
}

/// The single pixel that stands for an interaction when a merge or focus
/// region must be anchored: the click itself, otherwise the deepest pixel of
/// the positive raster (negative raster if there is no positive one, frame
/// center as a last resort).
pub fn anchor_of(own: &BiMap) -> Pixel {
    argmax_deepest(&own.positive)
        .or_else(|| argmax_deepest(&own.negative))
        .unwrap_or_else(|| {
            let (w, h) = own.dims();
            Pixel::new(w / 2, h / 2)
        })
}

pub fn interaction_anchor(i: &Interaction, own: &BiMap) -> Pixel {
    match i {
        Interaction::Click(c) => c.pixel(),
        _ => anchor_of(own),
    }
}
