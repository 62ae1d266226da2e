//! Voxel adjacency and connected-component labeling shared by the
//! skeleton, blob and feature code.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::volume::{Dims, Mask, Voxel};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "6")]
    Six,
    #[default]
    #[serde(rename = "26")]
    TwentySix,
}

impl Connectivity {
    pub fn offsets(self) -> &'static [[isize; 3]] {
        match self {
            Connectivity::Six => &FACE_OFFSETS,
            Connectivity::TwentySix => &OFFSETS_26,
        }
    }

    pub fn from_count(n: u32) -> Option<Self> {
        match n {
            6 => Some(Connectivity::Six),
            26 => Some(Connectivity::TwentySix),
            _ => None,
        }
    }
}

pub const FACE_OFFSETS: [[isize; 3]; 6] = [
    [-1, 0, 0],
    [1, 0, 0],
    [0, -1, 0],
    [0, 1, 0],
    [0, 0, -1],
    [0, 0, 1],
];

/// The 26 neighbor offsets in linear (x fastest) order.
pub const OFFSETS_26: [[isize; 3]; 26] = {
    let mut out = [[0isize; 3]; 26];
    let mut n = 0;
    let mut i = 0;
    while i < 27 {
        if i != 13 {
            out[n] = [(i % 3) as isize - 1, ((i / 3) % 3) as isize - 1, (i / 9) as isize - 1];
            n += 1;
        }
        i += 1;
    }
    out
};

/// Foreground 26-neighbors of `p` (outside the volume counts as background).
pub fn neighbors26(mask: &Mask, p: Voxel) -> impl Iterator<Item = Voxel> + '_ {
    let dims = mask.dims();
    OFFSETS_26
        .iter()
        .filter_map(move |&d| dims.offset(p, d))
        .filter(move |&q| mask.is_set(q))
}

pub fn count_neighbors26(mask: &Mask, p: Voxel) -> usize {
    neighbors26(mask, p).count()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    /// 1-based label.
    pub label: u32,
    pub size: usize,
    /// Unweighted mean voxel coordinate.
    pub centroid: [f64; 3],
    /// Linear index of the first voxel in scan order.
    pub first_index: usize,
}

/// Connected components labeled in order of their first voxel's linear index.
#[derive(Clone, Debug, PartialEq)]
pub struct Labeling {
    pub dims: Dims,
    pub labels: Vec<u32>,
    pub components: Vec<Component>,
}

impl Labeling {
    pub fn label_at(&self, p: Voxel) -> u32 {
        self.labels[self.dims.index(p)]
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Drops components smaller than `min_size` and renumbers the rest
    /// consecutively, keeping their relative order.
    pub fn filter_min_size(&self, min_size: usize) -> Labeling {
        let mut remap = vec![0u32; self.components.len() + 1];
        let mut components = Vec::new();
        for c in &self.components {
            if c.size >= min_size {
                let label = components.len() as u32 + 1;
                remap[c.label as usize] = label;
                components.push(Component { label, ..c.clone() });
            }
        }
        Labeling {
            dims: self.dims,
            labels: self.labels.iter().map(|&l| remap[l as usize]).collect(),
            components,
        }
    }
}

pub fn label(mask: &Mask, connectivity: Connectivity) -> Labeling {
    let dims = mask.dims();
    let offsets = connectivity.offsets();
    let mut labels = vec![0u32; dims.len()];
    let mut components = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..dims.len() {
        if mask.data()[start] == 0 || labels[start] != 0 {
            continue;
        }
        let label = components.len() as u32 + 1;
        labels[start] = label;
        queue.push_back(start);
        let mut size = 0usize;
        let mut sum = [0f64; 3];
        while let Some(i) = queue.pop_front() {
            let p = dims.coord(i);
            size += 1;
            for a in 0..3 {
                sum[a] += p[a] as f64;
            }
            for &d in offsets {
                if let Some(q) = dims.offset(p, d) {
                    let j = dims.index(q);
                    if mask.data()[j] != 0 && labels[j] == 0 {
                        labels[j] = label;
                        queue.push_back(j);
                    }
                }
            }
        }
        let n = size as f64;
        components.push(Component {
            label,
            size,
            centroid: [sum[0] / n, sum[1] / n, sum[2] / n],
            first_index: start,
        });
    }
    Labeling {
        dims,
        labels,
        components,
    }
}

pub fn count_components(mask: &Mask, connectivity: Connectivity) -> usize {
    label(mask, connectivity).len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{Volume, VolumeKind};

    #[test]
    fn offsets_are_the_26_neighbors() {
        assert_eq!(OFFSETS_26.len(), 26);
        assert!(!OFFSETS_26.contains(&[0, 0, 0]));
        assert_eq!(OFFSETS_26[0], [-1, -1, -1]);
        assert_eq!(OFFSETS_26[25], [1, 1, 1]);
    }

    #[test]
    fn diagonal_pair_depends_on_connectivity() {
        let mut m = Mask::empty(Dims::cube(3));
        m.set([0, 0, 0], 1);
        m.set([1, 1, 1], 1);
        assert_eq!(count_components(&m, Connectivity::TwentySix), 1);
        assert_eq!(count_components(&m, Connectivity::Six), 2);
    }

    #[test]
    fn filter_relabels_consecutively() {
        let m = Volume::from_fn(Dims::new(9, 1, 1), VolumeKind::BinaryMask, |[x, _, _]| {
            [1, 0, 1, 1, 1, 0, 1, 1, 0][x]
        });
        let l = label(&m, Connectivity::TwentySix).filter_min_size(2);
        assert_eq!(l.len(), 2);
        assert_eq!(l.labels, vec![0, 0, 1, 1, 1, 0, 2, 2, 0]);
        assert_eq!(l.components[1].centroid, [6.5, 0.0, 0.0]);
    }
}
