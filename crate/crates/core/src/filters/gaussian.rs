//! Separable Gaussian derivative filtering with edge replication.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::volume::{Dims, Volume};

/// Kernels are truncated at this many standard deviations.
pub const TRUNCATE: f64 = 4.0;
pub const MIN_SIGMA: f64 = 0.5;

/// One-sided taps `k[0..=radius]`; the full kernel is symmetric for even
/// derivative orders and antisymmetric for odd ones.
#[derive(Clone, Debug)]
pub struct Kernel {
    pub taps: Vec<f32>,
    pub odd: bool,
    /// Taps sum to zero; the center tap is applied implicitly as
    /// `Σ k(i)·(f(x−i) + f(x+i) − 2f(x))` so flat input gives exactly 0.
    pub zero_sum: bool,
}

impl Kernel {
    pub fn radius(&self) -> usize {
        self.taps.len() - 1
    }

    /// Value at signed offset `i`.
    pub fn at(&self, i: isize) -> f64 {
        let k = self.taps[i.unsigned_abs()] as f64;
        if self.odd && i < 0 {
            -k
        } else {
            k
        }
    }
}

/// Sampled Gaussian kernels of derivative order 0, 1 and 2.
///
/// Moments are corrected so the discrete kernels reproduce low-order
/// polynomials exactly: the smoothing kernel sums to 1, the first
/// derivative maps `x` to 1 and the second derivative sums to 0 and maps
/// `x²` to 2.
pub fn gaussian_kernels(sigma: f64) -> Result<[Kernel; 3]> {
    if !(sigma >= MIN_SIGMA) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sigma {sigma} below the minimum {MIN_SIGMA}"
        )));
    }
    let radius = (TRUNCATE * sigma).ceil() as isize;
    let s2 = sigma * sigma;
    let offsets: Vec<isize> = (-radius..=radius).collect();
    let g: Vec<f64> = offsets
        .iter()
        .map(|&i| (-(i * i) as f64 / (2.0 * s2)).exp())
        .collect();
    let sum: f64 = g.iter().sum();
    let g: Vec<f64> = g.iter().map(|v| v / sum).collect();

    let d1: Vec<f64> = offsets.iter().zip(&g).map(|(&i, gi)| -(i as f64) / s2 * gi).collect();
    // convolution with d1 maps f(x) = x to -Σ i·d1(i)
    let m1: f64 = -offsets.iter().zip(&d1).map(|(&i, k)| i as f64 * k).sum::<f64>();
    let d1: Vec<f64> = d1.iter().map(|k| k / m1).collect();

    let d2: Vec<f64> = offsets
        .iter()
        .zip(&g)
        .map(|(&i, gi)| ((i * i) as f64 / (s2 * s2) - 1.0 / s2) * gi)
        .collect();
    let s: f64 = d2.iter().sum();
    let d2: Vec<f64> = d2.iter().zip(&g).map(|(k, gi)| k - s * gi).collect();
    let m2: f64 = offsets.iter().zip(&d2).map(|(&i, k)| (i * i) as f64 * k).sum::<f64>() / 2.0;
    let d2: Vec<f64> = d2.iter().map(|k| k / m2).collect();

    let half = |full: &[f64], odd, zero_sum| Kernel {
        taps: full[radius as usize..].iter().map(|&v| v as f32).collect(),
        odd,
        zero_sum,
    };
    Ok([half(&g, false, false), half(&d1, true, false), half(&d2, false, true)])
}

/// Sums `tail[j] = Σ_{i ≥ j} k(i)` over the one-sided taps, with a
/// trailing zero. Taps that fall past an edge all read the same
/// replicated sample, so they collapse into one tail weight.
fn tail_sums(kernel: &Kernel) -> Vec<f32> {
    let mut tail = vec![0f64; kernel.taps.len() + 1];
    for i in (0..kernel.taps.len()).rev() {
        tail[i] = tail[i + 1] + kernel.taps[i] as f64;
    }
    tail.into_iter().map(|t| t as f32).collect()
}

#[inline]
fn axpy(o: &mut [f32], k: f32, a: &[f32]) {
    for (v, &x) in o.iter_mut().zip(a) {
        *v += k * x;
    }
}

#[inline]
fn axpy_centered(o: &mut [f32], k: f32, a: &[f32], c: &[f32]) {
    for ((v, &x), &y) in o.iter_mut().zip(a).zip(c) {
        *v += k * (x - y);
    }
}

/// Output line `t` of a convolution over `count` lines, each a contiguous
/// run of samples; `src(j)` is line `j`.
fn convolve_line<'a>(
    kernel: &Kernel,
    tail: &[f32],
    count: usize,
    t: usize,
    src: impl Fn(usize) -> &'a [f32],
    o: &mut [f32],
) {
    let r = kernel.radius();
    let sign = if kernel.odd { -1.0f32 } else { 1.0f32 };
    let c = src(t);
    let add = |o: &mut [f32], k: f32, a: &[f32]| {
        if kernel.zero_sum {
            axpy_centered(o, k, a, c)
        } else {
            axpy(o, k, a)
        }
    };
    if kernel.zero_sum {
        o.fill(0.0);
    } else {
        for (v, &x) in o.iter_mut().zip(c) {
            *v = kernel.taps[0] * x;
        }
    }
    // f(t - i) weighted k(i)
    for i in 1..=r.min(t) {
        add(o, kernel.taps[i], src(t - i));
    }
    if r > t {
        add(o, tail[t + 1], src(0));
    }
    // f(t + i) weighted k(-i)
    let room = count - 1 - t;
    for i in 1..=r.min(room) {
        add(o, sign * kernel.taps[i], src(t + i));
    }
    if r > room {
        add(o, sign * tail[room + 1], src(count - 1));
    }
}

fn transpose(src: &[f32], rows: usize, cols: usize, dst: &mut [f32]) {
    for (i, row) in src.chunks_exact(cols).enumerate() {
        for (j, &v) in row.iter().enumerate() {
            dst[j * rows + i] = v;
        }
    }
}

/// Convolves along one axis: `out(x) = Σ_i k(i) · f(x − i)` with indices
/// clamped to the volume.
pub fn convolve_axis(input: &[f32], dims: Dims, axis: usize, kernel: &Kernel) -> Vec<f32> {
    let mut out = vec![0f32; input.len()];
    let tail = tail_sums(kernel);
    match axis {
        0 => {
            // transpose each z-slice so x indexes contiguous lines of length ny
            let (nx, ny) = (dims.nx, dims.ny);
            let slice = nx * ny;
            out.par_chunks_mut(slice)
                .zip(input.par_chunks(slice))
                .for_each_init(
                    || (vec![0f32; slice], vec![0f32; slice]),
                    |(tin, tout), (o, i)| {
                        transpose(i, ny, nx, tin);
                        for (x, line) in tout.chunks_exact_mut(ny).enumerate() {
                            convolve_line(kernel, &tail, nx, x, |j| &tin[j * ny..(j + 1) * ny], line);
                        }
                        transpose(tout, nx, ny, o);
                    },
                );
        }
        1 | 2 => {
            let (line, count, block) = if axis == 1 {
                (dims.nx, dims.ny, dims.nx * dims.ny)
            } else {
                (dims.nx * dims.ny, dims.nz, dims.len())
            };
            out.par_chunks_mut(block)
                .zip(input.par_chunks(block))
                .for_each(|(ob, ib)| {
                    ob.par_chunks_mut(line).enumerate().for_each(|(y, o)| {
                        convolve_line(kernel, &tail, count, y, |j| &ib[j * line..(j + 1) * line], o);
                    });
                });
        }
        _ => panic!("axis {axis} out of range"),
    }
    out
}

/// Per-voxel Hessian entries of the σ-smoothed volume, scale-normalized
/// by σ².
#[derive(Clone, Debug)]
pub struct HessianField {
    pub dims: Dims,
    pub sigma: f64,
    pub hxx: Vec<f32>,
    pub hyy: Vec<f32>,
    pub hzz: Vec<f32>,
    pub hxy: Vec<f32>,
    pub hxz: Vec<f32>,
    pub hyz: Vec<f32>,
}

impl HessianField {
    #[inline]
    pub fn matrix(&self, i: usize) -> [[f64; 3]; 3] {
        let (xx, yy, zz) = (self.hxx[i] as f64, self.hyy[i] as f64, self.hzz[i] as f64);
        let (xy, xz, yz) = (self.hxy[i] as f64, self.hxz[i] as f64, self.hyz[i] as f64);
        [[xx, xy, xz], [xy, yy, yz], [xz, yz, zz]]
    }

    pub fn len(&self) -> usize {
        self.hxx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hxx.is_empty()
    }
}

/// Magnitudes below `max|f| · 2⁻¹⁰⁰` are flushed to zero before and
/// between passes. The far tails of smooth inputs otherwise fill the
/// intermediate buffers with subnormal floats, which are very slow.
fn flush_floor(data: &[f32]) -> f32 {
    let max = data.iter().fold(0f32, |m, &x| m.max(x.abs()));
    max * 2f32.powi(-100)
}

fn flushed(mut data: Vec<f32>, floor: f32) -> Vec<f32> {
    data.par_iter_mut().for_each(|x| {
        if x.abs() < floor {
            *x = 0.0;
        }
    });
    data
}

pub fn gaussian_hessian(v: &Volume<f32>, sigma: f64) -> Result<HessianField> {
    let [g0, g1, g2] = gaussian_kernels(sigma)?;
    let dims = v.dims();
    let floor = flush_floor(v.data());
    let conv = |data: &[f32], axis, k: &Kernel| flushed(convolve_axis(data, dims, axis, k), floor);

    let input = flushed(v.data().to_vec(), floor);
    let x0 = conv(&input, 0, &g0);
    let x1 = conv(&input, 0, &g1);
    let x2 = conv(&input, 0, &g2);
    drop(input);

    let x0y0 = conv(&x0, 1, &g0);
    let x0y1 = conv(&x0, 1, &g1);
    let x0y2 = conv(&x0, 1, &g2);
    drop(x0);
    let x1y0 = conv(&x1, 1, &g0);
    let x1y1 = conv(&x1, 1, &g1);
    drop(x1);
    let x2y0 = conv(&x2, 1, &g0);
    drop(x2);

    let norm = (sigma * sigma) as f32;
    let finish = |data: &[f32], k: &Kernel| {
        let mut out = conv(data, 2, k);
        out.iter_mut().for_each(|h| *h *= norm);
        out
    };
    Ok(HessianField {
        dims,
        sigma,
        hzz: finish(&x0y0, &g2),
        hyz: finish(&x0y1, &g1),
        hyy: finish(&x0y2, &g0),
        hxz: finish(&x1y0, &g1),
        hxy: finish(&x1y1, &g0),
        hxx: finish(&x2y0, &g0),
    })
}

/// Gaussian smoothing (derivative order 0 on every axis).
pub fn gaussian_smooth(v: &Volume<f32>, sigma: f64) -> Result<Volume<f32>> {
    let [g0, _, _] = gaussian_kernels(sigma)?;
    let dims = v.dims();
    let mut data = convolve_axis(v.data(), dims, 0, &g0);
    data = convolve_axis(&data, dims, 1, &g0);
    data = convolve_axis(&data, dims, 2, &g0);
    Volume::from_vec(dims, data, v.kind())
}
