use serde::{Deserialize, Serialize};

use super::{BinaryMask, Pixel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[default]
    #[serde(rename = "8")]
    Eight,
}

impl Connectivity {
    pub(crate) fn offsets(self) -> &'static [(i64, i64)] {
        const FOUR: [(i64, i64); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];
        const EIGHT: [(i64, i64); 8] = [
            (-1, -1),
            (0, -1),
            (1, -1),
            (-1, 0),
            (1, 0),
            (-1, 1),
            (0, 1),
            (1, 1),
        ];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

/// Integer labeling of a raster; label 0 is background for component labelings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionLabeling {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    pub region_count: u32,
}

impl RegionLabeling {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    /// Mask of all pixels carrying `label`.
    pub fn region_mask(&self, label: u32) -> BinaryMask {
        BinaryMask::from_vec(
            self.width,
            self.height,
            self.labels.iter().map(|&l| (l == label) as u8).collect(),
        )
        .expect("labeling dims are valid")
    }

    /// Pixel count per label, indexed by label (index 0 counts background).
    pub fn areas(&self) -> Vec<usize> {
        let mut areas = vec![0usize; self.region_count as usize + 1];
        for &l in &self.labels {
            areas[l as usize] += 1;
        }
        areas
    }
}

/// Labels foreground components 1..K in order of first encounter in a
/// row-major scan.
pub fn connected_components(m: &BinaryMask, connectivity: Connectivity) -> RegionLabeling {
    let (w, h) = m.dims();
    let mut labels = vec![0u32; w * h];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if m.data()[start] == 0 || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for &(dx, dy) in connectivity.offsets() {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if m.data()[j] != 0 && labels[j] == 0 {
                    labels[j] = next;
                    stack.push(j);
                }
            }
        }
    }
    RegionLabeling {
        width: w,
        height: h,
        labels,
        region_count: next,
    }
}

/// Selects one foreground component.
///
/// Without an anchor this is the component of maximal area (ties go to the
/// lowest label). With an anchor it is the component containing the anchor;
/// if the anchor sits on background the component nearest to it in Euclidean
/// distance wins, again breaking ties by label. An empty mask yields an empty
/// result.
pub fn largest_component(
    m: &BinaryMask,
    connectivity: Connectivity,
    anchor: Option<Pixel>,
) -> BinaryMask {
    let lab = connected_components(m, connectivity);
    if lab.region_count == 0 {
        return BinaryMask::new(m.width(), m.height());
    }
    let chosen = match anchor {
        Some(a) if a.x < m.width() && a.y < m.height() && lab.get(a.x, a.y) != 0 => {
            lab.get(a.x, a.y)
        }
        Some(a) => {
            let mut best = vec![u64::MAX; lab.region_count as usize + 1];
            for (i, &l) in lab.labels.iter().enumerate() {
                if l == 0 {
                    continue;
                }
                let dx = (i % m.width()) as i64 - a.x as i64;
                let dy = (i / m.width()) as i64 - a.y as i64;
                let d = (dx * dx + dy * dy) as u64;
                if d < best[l as usize] {
                    best[l as usize] = d;
                }
            }
            (1..=lab.region_count)
                .min_by_key(|&l| (best[l as usize], l))
                .unwrap()
        }
        None => {
            let areas = lab.areas();
            (1..=lab.region_count)
                .min_by_key(|&l| (std::cmp::Reverse(areas[l as usize]), l))
                .unwrap()
        }
    };
    lab.region_mask(chosen)
}
