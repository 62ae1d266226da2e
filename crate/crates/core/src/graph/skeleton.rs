//! Topology-preserving 3D thinning.
//!
//! Directional sequential thinning with (26, 6) adjacency: in each of six
//! sub-iterations, border voxels facing one direction that are simple
//! points and not line ends are collected, then re-checked and deleted one
//! at a time. Deleting only simple points keeps the number of
//! 26-connected foreground components (and background cavities/tunnels)
//! unchanged. Voxels outside the volume count as background.

use crate::volume::{Dims, Mask, VolumeKind};

const CENTER: u32 = 13;

const fn pos(i: u32) -> [i32; 3] {
    [(i % 3) as i32 - 1, ((i / 3) % 3) as i32 - 1, (i / 9) as i32 - 1]
}

/// Bitmasks of in-cube neighbors for each of the 27 positions.
const ADJ26: [u32; 27] = {
    let mut out = [0u32; 27];
    let mut i = 0;
    while i < 27 {
        let a = pos(i);
        let mut j = 0;
        while j < 27 {
            let b = pos(j);
            let dx = (a[0] - b[0]).abs();
            let dy = (a[1] - b[1]).abs();
            let dz = (a[2] - b[2]).abs();
            if j != i && j != CENTER && dx <= 1 && dy <= 1 && dz <= 1 {
                out[i as usize] |= 1 << j;
            }
            j += 1;
        }
        i += 1;
    }
    out
};

const ADJ6: [u32; 27] = {
    let mut out = [0u32; 27];
    let mut i = 0;
    while i < 27 {
        let a = pos(i);
        let mut j = 0;
        while j < 27 {
            let b = pos(j);
            let d = (a[0] - b[0]).abs() + (a[1] - b[1]).abs() + (a[2] - b[2]).abs();
            if j != CENTER && d == 1 {
                out[i as usize] |= 1 << j;
            }
            j += 1;
        }
        i += 1;
    }
    out
};

/// The 18-neighborhood (faces and edges, no corners), excluding the center.
const N18: u32 = {
    let mut m = 0u32;
    let mut i = 0;
    while i < 27 {
        let a = pos(i);
        let d = a[0].abs() + a[1].abs() + a[2].abs();
        if d == 1 || d == 2 {
            m |= 1 << i;
        }
        i += 1;
    }
    m
};

const FACES: u32 = (1 << 4) | (1 << 10) | (1 << 12) | (1 << 14) | (1 << 16) | (1 << 22);

fn flood(seed: u32, allowed: u32, adj: &[u32; 27]) -> u32 {
    let mut visited = seed;
    let mut frontier = seed;
    while frontier != 0 {
        let i = frontier.trailing_zeros();
        frontier &= frontier - 1;
        let fresh = adj[i as usize] & allowed & !visited;
        visited |= fresh;
        frontier |= fresh;
    }
    visited
}

/// Simple-point test on a 3×3×3 occupancy word (bit `i` = position `i`,
/// x fastest; bit 13 is the center).
pub fn is_simple(nb: u32) -> bool {
    let fg = nb & !(1 << CENTER) & ((1 << 27) - 1);
    if fg == 0 {
        return false;
    }
    if flood(fg & fg.wrapping_neg(), fg, &ADJ26) != fg {
        return false;
    }
    let bg = !nb & N18;
    let bg_faces = bg & FACES;
    if bg_faces == 0 {
        return false;
    }
    let reached = flood(bg_faces & bg_faces.wrapping_neg(), bg, &ADJ6);
    reached & bg_faces == bg_faces
}

fn occupancy(data: &[u8], dims: Dims, x: usize, y: usize, z: usize) -> u32 {
    let mut nb = 0u32;
    let mut bit = 0;
    for dz in -1isize..=1 {
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let (qx, qy, qz) = (x as isize + dx, y as isize + dy, z as isize + dz);
                if qx >= 0
                    && qy >= 0
                    && qz >= 0
                    && (qx as usize) < dims.nx
                    && (qy as usize) < dims.ny
                    && (qz as usize) < dims.nz
                    && data[dims.index([qx as usize, qy as usize, qz as usize])] != 0
                {
                    nb |= 1 << bit;
                }
                bit += 1;
            }
        }
    }
    nb
}

/// Face positions in the order the sub-iterations visit them.
const DIRECTIONS: [u32; 6] = [10, 16, 14, 12, 22, 4];

/// Thins a binary mask to a one-voxel-wide 26-connected skeleton.
pub fn skeletonize(mask: &Mask) -> Mask {
    let dims = mask.dims();
    let mut data: Vec<u8> = mask.data().iter().map(|&v| (v != 0) as u8).collect();
    let mut alive: Vec<usize> = (0..data.len()).filter(|&i| data[i] != 0).collect();
    let mut candidates = Vec::new();
    loop {
        let mut removed_any = false;
        for dir in DIRECTIONS {
            candidates.clear();
            for &i in &alive {
                let [x, y, z] = dims.coord(i);
                let nb = occupancy(&data, dims, x, y, z);
                if nb & (1 << dir) == 0 && is_removable(nb) {
                    candidates.push(i);
                }
            }
            let mut removed = false;
            for &i in &candidates {
                let [x, y, z] = dims.coord(i);
                if is_removable(occupancy(&data, dims, x, y, z)) {
                    data[i] = 0;
                    removed = true;
                }
            }
            if removed {
                alive.retain(|&i| data[i] != 0);
                removed_any = true;
            }
        }
        if !removed_any {
            break;
        }
    }
    Mask::from_vec(dims, data, VolumeKind::BinaryMask)
        .expect("same dims")
        .with_spacing(mask.spacing())
}

fn is_removable(nb: u32) -> bool {
    let neighbors = (nb & !(1 << CENTER)).count_ones();
    neighbors != 1 && is_simple(nb)
}
