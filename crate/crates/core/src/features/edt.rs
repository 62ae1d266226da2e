//! Exact Euclidean distance transform (separable lower-envelope method).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::volume::{Dims, Mask, Volume, VolumeKind, Voxel};

/// Distance from every foreground voxel to the nearest background voxel,
/// with everything outside the volume counted as background. Background
/// voxels get 0.
pub fn edt(mask: &Mask) -> Volume<f64> {
    let d2 = squared_edt(mask);
    let data = d2.into_par_iter().map(|v| (v as f64).sqrt()).collect();
    Volume::from_vec(mask.dims(), data, VolumeKind::Response)
        .expect("dims match")
        .with_spacing(mask.spacing())
}

/// Integer squared distances, computed on the mask padded by one
/// background voxel per side and cropped back.
pub fn squared_edt(mask: &Mask) -> Vec<u64> {
    let dims = mask.dims();
    let pd = Dims::new(dims.nx + 2, dims.ny + 2, dims.nz + 2);
    let far = (3 * (pd.nx + pd.ny + pd.nz).pow(2)) as u64;
    let mut f = vec![0u64; pd.len()];
    for p in mask.foreground() {
        f[pd.index([p[0] + 1, p[1] + 1, p[2] + 1])] = far;
    }

    // x: lines are contiguous
    f.par_chunks_mut(pd.nx).for_each_init(Scratch::default, |s, line| s.transform(line));
    // y and z: gather strided lines
    for axis in [1usize, 2] {
        let (n, stride) = if axis == 1 { (pd.ny, pd.nx) } else { (pd.nz, pd.nx * pd.ny) };
        let lines: Vec<usize> = (0..pd.len()).filter(|&i| (i / stride) % n == 0).collect();
        let results: Vec<Vec<u64>> = lines
            .par_iter()
            .map_init(Scratch::default, |s, &base| {
                let mut line: Vec<u64> = (0..n).map(|k| f[base + k * stride]).collect();
                s.transform(&mut line);
                line
            })
            .collect();
        for (&base, line) in lines.iter().zip(results) {
            for (k, v) in line.into_iter().enumerate() {
                f[base + k * stride] = v;
            }
        }
    }

    let mut out = Vec::with_capacity(dims.len());
    for z in 0..dims.nz {
        for y in 0..dims.ny {
            let row = pd.index([1, y + 1, z + 1]);
            out.extend_from_slice(&f[row..row + dims.nx]);
        }
    }
    out
}

#[derive(Default)]
struct Scratch {
    v: Vec<usize>,
    z: Vec<f64>,
    out: Vec<u64>,
}

impl Scratch {
    /// 1-D squared distance transform of sampled function `f` in place:
    /// `d(p) = min_q (p − q)² + f(q)`.
    fn transform(&mut self, f: &mut [u64]) {
        let n = f.len();
        self.v.clear();
        self.z.clear();
        self.out.clear();
        self.v.push(0);
        self.z.push(f64::NEG_INFINITY);
        let parabola = |q: usize| f[q] as f64 + (q * q) as f64;
        for q in 1..n {
            loop {
                let k = self.v.len() - 1;
                let vk = self.v[k];
                let s = (parabola(q) - parabola(vk)) / (2.0 * (q - vk) as f64);
                if s <= self.z[k] {
                    self.v.pop();
                    self.z.pop();
                } else {
                    self.v.push(q);
                    self.z.push(s);
                    break;
                }
            }
        }
        let mut k = 0;
        for p in 0..n {
            while k + 1 < self.v.len() && self.z[k + 1] < p as f64 {
                k += 1;
            }
            let q = self.v[k];
            let d = p.abs_diff(q) as u64;
            self.out.push(d * d + f[q]);
        }
        f.copy_from_slice(&self.out);
    }
}

/// Distance-field value at a foreground voxel; a radius estimate.
pub fn thickness_at(distance: &Volume<f64>, p: Voxel) -> Result<f64> {
    let d = distance.try_get(p)?;
    if d <= 0.0 {
        return Err(Error::Background(p));
    }
    Ok(d)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    /// All-pairs search against every background voxel, including a one-voxel
    /// background frame around the volume.
    pub(crate) fn brute_force(mask: &Mask) -> Vec<f64> {
        let dims = mask.dims();
        let mut bg: Vec<[i64; 3]> = Vec::new();
        for z in -1..=dims.nz as i64 {
            for y in -1..=dims.ny as i64 {
                for x in -1..=dims.nx as i64 {
                    let inside = x >= 0 && y >= 0 && z >= 0 && (x as usize) < dims.nx && (y as usize) < dims.ny && (z as usize) < dims.nz;
                    if !inside || !mask.is_set([x as usize, y as usize, z as usize]) {
                        bg.push([x, y, z]);
                    }
                }
            }
        }
        (0..dims.len())
            .map(|i| {
                let p = dims.coord(i);
                if !mask.is_set(p) {
                    return 0.0;
                }
                let best = bg
                    .iter()
                    .map(|b| (0..3).map(|a| (b[a] - p[a] as i64).pow(2)).sum::<i64>())
                    .min()
                    .unwrap();
                (best as f64).sqrt()
            })
            .collect()
    }

    #[test]
    fn single_voxel() {
        let mut m = Mask::empty(Dims::cube(5));
        m.set([2, 2, 2], 1);
        let d = edt(&m);
        assert_eq!(d.get([2, 2, 2]), 1.0);
        assert_eq!(thickness_at(&d, [2, 2, 2]).unwrap(), 1.0);
        assert!(matches!(thickness_at(&d, [0, 0, 0]), Err(Error::Background(_))));
    }

    #[test]
    fn centered_cube() {
        let m = Mask::from_fn(Dims::cube(7), VolumeKind::BinaryMask, |p| p.iter().all(|&c| (2..5).contains(&c)) as u8);
        let d = edt(&m);
        assert_eq!(d.get([3, 3, 3]), 2.0);
        assert_eq!(d.data(), brute_force(&m).as_slice());
    }

    #[test]
    fn full_volume_uses_border() {
        let m = Mask::filled(Dims::new(5, 9, 3), 1, VolumeKind::BinaryMask);
        let d = edt(&m);
        assert_eq!(d.get([2, 4, 1]), 2.0);
        assert_eq!(d.data(), brute_force(&m).as_slice());
    }

    #[test]
    fn cylinder_axis_thickness() {
        let dims = Dims::new(30, 15, 15);
        let m = Mask::from_fn(dims, VolumeKind::BinaryMask, |[_, y, z]| {
            ((y as f64 - 7.0).powi(2) + (z as f64 - 7.0).powi(2) <= 9.0) as u8
        });
        let t = thickness_at(&edt(&m), [15, 7, 7]).unwrap();
        assert!((2.5..=3.5).contains(&t), "{t}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn matches_brute_force(nx in 1usize..10, ny in 1usize..10, nz in 1usize..10, density in 0.3f64..1.0, seed in any::<u64>()) {
            let dims = Dims::new(nx, ny, nz);
            let m = Mask::from_fn(dims, VolumeKind::BinaryMask, |p| {
                let h = (dims.index(p) as u64 + 1).wrapping_mul(seed | 1).wrapping_mul(0x9E3779B97F4A7C15);
                (((h >> 11) as f64 / (1u64 << 53) as f64) < density) as u8
            });
            let (got, want) = (edt(&m).into_data(), brute_force(&m));
            prop_assert_eq!(got, want);
        }
    }
}
