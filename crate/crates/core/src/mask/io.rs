//! Mask serialization: 8-bit grayscale PNG, COCO-style uncompressed RLE and
//! 16-bit label PNGs.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, ImageFormat, Luma, RgbImage};
use serde::{Deserialize, Serialize};

use super::{BinaryMask, RegionLabeling};
use crate::error::{Error, Result};

/// Run-length encoding in COCO layout: `size` is `[height, width]`, runs
/// alternate 0/1 over the column-major pixel order and the first run counts
/// zeros (possibly zero of them).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rle {
    pub size: [usize; 2],
    pub counts: Vec<u32>,
}

pub fn encode_rle(m: &BinaryMask) -> Rle {
    let (w, h) = m.dims();
    let mut counts = Vec::new();
    let mut current = 0u8;
    let mut run = 0u32;
    for x in 0..w {
        for y in 0..h {
            let v = m.get(x, y) as u8;
            if v != current {
                counts.push(run);
                run = 0;
                current = v;
            }
            run += 1;
        }
    }
    counts.push(run);
    Rle {
        size: [h, w],
        counts,
    }
}

pub fn decode_rle(rle: &Rle) -> Result<BinaryMask> {
    let [h, w] = rle.size;
    if w == 0 || h == 0 {
        return Err(Error::InvalidDimensions(w, h));
    }
    let total: u64 = rle.counts.iter().map(|&c| c as u64).sum();
    if total != (w * h) as u64 {
        return Err(Error::InvalidParameter(format!(
            "rle counts sum to {total}, expected {}",
            w * h
        )));
    }
    let mut m = BinaryMask::new(w, h);
    let mut idx = 0usize;
    for (i, &c) in rle.counts.iter().enumerate() {
        if i % 2 == 1 {
            for k in idx..idx + c as usize {
                m.set(k / h, k % h, true);
            }
        }
        idx += c as usize;
    }
    Ok(m)
}

impl Serialize for BinaryMask {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        encode_rle(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for BinaryMask {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rle = Rle::deserialize(d)?;
        decode_rle(&rle).map_err(serde::de::Error::custom)
    }
}

pub fn mask_to_gray(m: &BinaryMask) -> GrayImage {
    GrayImage::from_raw(
        m.width() as u32,
        m.height() as u32,
        m.data().iter().map(|&v| v * 255).collect(),
    )
    .expect("buffer matches dims")
}

/// Binarizes an 8-bit image at 128.
pub fn mask_from_image(img: &DynamicImage) -> BinaryMask {
    let g = img.to_luma8();
    BinaryMask::from_vec(
        g.width() as usize,
        g.height() as usize,
        g.into_raw().into_iter().map(|v| (v >= 128) as u8).collect(),
    )
    .expect("decoded image has positive dims")
}

pub fn encode_mask_png(m: &BinaryMask) -> Vec<u8> {
    let mut buf = Cursor::new(Vec::new());
    mask_to_gray(m)
        .write_to(&mut buf, ImageFormat::Png)
        .expect("png encoding into memory");
    buf.into_inner()
}

pub fn decode_mask_png(bytes: &[u8]) -> Result<BinaryMask> {
    Ok(mask_from_image(&image::load_from_memory(bytes)?))
}

pub fn encode_rgb_png(img: &RgbImage) -> Vec<u8> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)
        .expect("png encoding into memory");
    buf.into_inner()
}

pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    Ok(mask_from_image(&image::open(path)?))
}

pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    Ok(image::open(path)?.to_rgb8())
}

/// Writes a file atomically: the bytes land in a sibling temp file which is
/// then renamed over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn save_mask(m: &BinaryMask, path: &Path) -> Result<()> {
    write_atomic(path, &encode_mask_png(m))
}

/// 16-bit grayscale PNG of a labeling; labels above 65535 saturate.
pub fn encode_labels_png(l: &RegionLabeling) -> Vec<u8> {
    let img: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(
        l.width as u32,
        l.height as u32,
        l.labels.iter().map(|&v| v.min(u16::MAX as u32) as u16).collect(),
    )
    .expect("buffer matches dims");
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)
        .expect("png encoding into memory");
    buf.into_inner()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rle_layout() {
        // 2x2, column-major order: (0,0) (0,1) (1,0) (1,1)
        let mut m = BinaryMask::new(2, 2);
        m.set(0, 0, true);
        m.set(1, 1, true);
        let r = encode_rle(&m);
        assert_eq!(r.size, [2, 2]);
        assert_eq!(r.counts, vec![0, 1, 2, 1]);
        assert_eq!(encode_rle(&BinaryMask::new(3, 2)).counts, vec![6]);
        let bad = Rle {
            size: [2, 2],
            counts: vec![1, 1],
        };
        assert!(decode_rle(&bad).is_err());
    }

    #[test]
    fn png_binarizes_at_128() {
        let g = GrayImage::from_raw(3, 1, vec![0, 127, 128]).unwrap();
        let m = mask_from_image(&DynamicImage::ImageLuma8(g));
        assert_eq!(m.data(), &[0, 0, 1]);
    }

    proptest! {
        #[test]
        fn rle_and_png_round_trip(w in 1usize..24, h in 1usize..24, bits in proptest::collection::vec(0u8..2, 576)) {
            let m = BinaryMask::from_fn(w, h, |x, y| bits[y * 24 + x] == 1);
            prop_assert_eq!(decode_rle(&encode_rle(&m)).unwrap(), m.clone());
            prop_assert_eq!(decode_mask_png(&encode_mask_png(&m)).unwrap(), m);
        }
    }
}
