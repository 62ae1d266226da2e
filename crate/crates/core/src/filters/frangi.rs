//! Frangi vesselness from Hessian eigenvalues, single- and multiscale.

use rayon::prelude::*;

use super::eigen::{symmetric_eigenvalues, EigenField};
use super::gaussian::gaussian_hessian;
use super::{FrangiParams, RidgeMode};
use crate::error::Result;
use crate::volume::{Volume, VolumeKind};

/// Structureness below this counts as flat.
pub const EPS: f64 = 1e-12;

/// Frangi response of one magnitude-ordered eigenvalue triple, for bright
/// structures on a dark background.
///
/// ```text
/// F = (1 - exp(-Ra²/2α²)) · exp(-Rb²/2β²) · (1 - exp(-S²/2C²))   if λ2, λ3 ≤ 0
///   = 0                                                          otherwise
/// Rb = |λ1| / sqrt(|λ2 λ3|),  Ra = |λ2| / |λ3|,  S = sqrt(λ1² + λ2² + λ3²)
/// ```
///
/// With `params.invert_blob_term` the middle factor becomes
/// `1 - exp(-Rb²/2β²)`, which favors blobs instead of tubes.
#[inline]
pub fn frangi_value(ev: [f64; 3], params: &FrangiParams) -> f64 {
    let [l1, l2, l3] = ev;
    if l2 > 0.0 || l3 > 0.0 {
        return 0.0;
    }
    let s2 = l1 * l1 + l2 * l2 + l3 * l3;
    if s2.sqrt() < EPS {
        return 0.0;
    }
    let ra = l2.abs() / l3.abs();
    let l23 = (l2 * l3).abs();
    let rb = if l23 < EPS * EPS { 0.0 } else { l1.abs() / l23.sqrt() };
    let (a, b, c) = (params.alpha, params.beta, params.c);
    let plate = -(-(ra * ra) / (2.0 * a * a)).exp_m1();
    let blob_exp = (-(rb * rb) / (2.0 * b * b)).exp();
    let blob = if params.invert_blob_term { 1.0 - blob_exp } else { blob_exp };
    let structure = -(-s2 / (2.0 * c * c)).exp_m1();
    plate * blob * structure
}

#[inline]
fn oriented(ev: [f64; 3], mode: RidgeMode) -> [f64; 3] {
    match mode {
        RidgeMode::White => ev,
        RidgeMode::Black => ev.map(|l| -l),
    }
}

pub fn frangi_response(e: &EigenField, params: &FrangiParams) -> Volume<f32> {
    let data = e
        .values
        .par_iter()
        .map(|&ev| frangi_value(oriented(ev, params.ridge_mode), params) as f32)
        .collect();
    Volume::from_vec(e.dims, data, VolumeKind::Response).expect("eigen field matches dims")
}

/// Single-scale response, fusing eigen-decomposition and Frangi per voxel.
pub fn frangi_at_scale(v: &Volume<f32>, sigma: f64, params: &FrangiParams) -> Result<Volume<f32>> {
    let h = gaussian_hessian(v, sigma)?;
    let orient = match params.ridge_mode {
        RidgeMode::White => 1.0,
        RidgeMode::Black => -1.0,
    };
    let data = (0..h.len())
        .into_par_iter()
        .map(|i| {
            // λ2, λ3 ≤ 0 with |λ1| smallest forces trace ≤ 0; a clearly
            // positive trace means a zero response
            let diag = [h.hxx[i], h.hyy[i], h.hzz[i]].map(f64::from);
            let trace = orient * (diag[0] + diag[1] + diag[2]);
            if trace > 1e-6 * diag.iter().map(|d| d.abs()).sum::<f64>() {
                return 0.0;
            }
            let ev = symmetric_eigenvalues(&h.matrix(i));
            frangi_value(oriented(ev, params.ridge_mode), params) as f32
        })
        .collect();
    Ok(Volume::from_vec(v.dims(), data, VolumeKind::Response)?.with_spacing(v.spacing()))
}

/// Voxel-wise maximum of the Frangi response over `params.sigmas`.
pub fn multiscale_frangi(v: &Volume<f32>, params: &FrangiParams) -> Result<Volume<f32>> {
    params.validate()?;
    let mut out = Volume::zeros(v.dims(), VolumeKind::Response).with_spacing(v.spacing());
    for &sigma in &params.sigmas {
        let r = frangi_at_scale(v, sigma, params)?;
        out.data_mut()
            .par_iter_mut()
            .zip(r.data().par_iter())
            .for_each(|(o, &x)| *o = o.max(x));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::hessian_eigenvalues;
    use crate::volume::Dims;
    use proptest::prelude::*;

    fn bump(dims: Dims, c: [f64; 3], s: f64, amp: f32) -> Volume<f32> {
        Volume::from_fn(dims, VolumeKind::Attribution, |p| {
            let d2: f64 = (0..3).map(|a| (p[a] as f64 - c[a]).powi(2)).sum();
            amp * (-d2 / (2.0 * s * s)).exp() as f32
        })
    }

    #[test]
    fn zero_eigenvalues_give_zero() {
        assert_eq!(frangi_value([0.0; 3], &FrangiParams::default()), 0.0);
    }

    #[test]
    fn tube_triple_matches_hand_evaluation() {
        let p = FrangiParams::default();
        let want = (1.0 - (-2.0f64).exp()) * 1.0 * (1.0 - (-2.0f64 / 450.0).exp());
        assert!((frangi_value([0.0, -1.0, -1.0], &p) - want).abs() < 1e-15);
    }

    #[test]
    fn positive_large_eigenvalue_gives_zero() {
        let p = FrangiParams::default();
        assert_eq!(frangi_value([-0.1, -1.0, 2.0], &p), 0.0);
        assert_eq!(frangi_value([-0.1, 1.0, -2.0], &p), 0.0);
        assert!(frangi_value([0.1, -1.0, -2.0], &p) > 0.0);
    }

    #[test]
    fn blobness_variant_prefers_isotropic() {
        let tube = [0.0, -1.0, -1.0];
        let ball = [-1.0, -1.0, -1.0];
        let verbatim = FrangiParams::default();
        assert!(frangi_value(tube, &verbatim) > frangi_value(ball, &verbatim));
        let blob = FrangiParams {
            invert_blob_term: true,
            ..FrangiParams::default()
        };
        assert!(frangi_value(ball, &blob) > frangi_value(tube, &blob));
    }

    #[test]
    fn constant_volume_all_zero() {
        let v = Volume::filled(Dims::cube(16), 2.0f32, VolumeKind::Intensity);
        let r = multiscale_frangi(&v, &FrangiParams::with_sigmas(vec![2.0, 3.0])).unwrap();
        assert!(r.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_scale_equals_fused_path() {
        let v = bump(Dims::cube(20), [9.5, 10.0, 10.2], 3.0, 1.0);
        let p = FrangiParams::with_sigmas(vec![2.0]);
        let h = crate::filters::gaussian_hessian(&v, 2.0).unwrap();
        let a = frangi_response(&hessian_eigenvalues(&h), &p);
        let b = multiscale_frangi(&v, &p).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn bright_tube_has_two_negative_directions() {
        let dims = Dims::new(24, 21, 21);
        let v = Volume::from_fn(dims, VolumeKind::Intensity, |[_, y, z]| {
            let d2 = (y as f64 - 10.0).powi(2) + (z as f64 - 10.0).powi(2);
            (-d2 / 8.0).exp() as f32
        });
        let h = crate::filters::gaussian_hessian(&v, 2.0).unwrap();
        let ev = symmetric_eigenvalues(&h.matrix(dims.index([12, 10, 10])));
        assert!(ev[0].abs() < 1e-3, "{ev:?}");
        assert!(ev[1] < -0.1 && ev[2] < -0.1, "{ev:?}");
        let r = multiscale_frangi(&v, &FrangiParams::with_sigmas(vec![2.0])).unwrap();
        assert!(r.get([12, 10, 10]) > r.get([12, 10, 16]));
    }

    #[test]
    fn bump_peak_scale() {
        // sweep scales on a σ=4 bump and record where the center response peaks
        let dims = Dims::cube(48);
        let v = bump(dims, [24.0; 3], 4.0, 1.0);
        let center = [24, 24, 24];
        let responses: Vec<(f64, f32)> = (2..=16)
            .map(|s| {
                let s = s as f64;
                let r = frangi_at_scale(&v, s, &FrangiParams::default()).unwrap();
                (s, r.get(center))
            })
            .collect();
        let best = responses.iter().cloned().fold((0.0, f32::MIN), |a, b| if b.1 > a.1 { b } else { a });
        assert!((3.0..=6.0).contains(&best.0), "{responses:?}");
    }

    #[test]
    fn white_black_duality() {
        let v = bump(Dims::cube(18), [8.0, 9.0, 9.5], 2.5, 1.0);
        let black = FrangiParams {
            ridge_mode: RidgeMode::Black,
            ..FrangiParams::with_sigmas(vec![2.0, 3.0])
        };
        let white = FrangiParams::with_sigmas(vec![2.0, 3.0]);
        let a = multiscale_frangi(&v, &black).unwrap();
        let b = multiscale_frangi(&v.negated(), &white).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn axis_permutation_invariance_at_center() {
        let dims = Dims::new(24, 28, 32);
        let c = [11.0, 13.0, 15.0];
        let v = bump(dims, c, 3.0, 1.5);
        let p = FrangiParams::with_sigmas(vec![2.0, 3.0, 4.0]);
        let base = multiscale_frangi(&v, &p).unwrap().get([11, 13, 15]);
        assert!(base > 0.0);
        // permute axes (x,y,z) -> (z,x,y)
        let pd = Dims::new(32, 24, 28);
        let pv = bump(pd, [15.0, 11.0, 13.0], 3.0, 1.5);
        let permuted = multiscale_frangi(&pv, &p).unwrap().get([15, 11, 13]);
        assert!((base - permuted).abs() < 1e-6, "{base} vs {permuted}");
    }

    proptest! {
        #[test]
        fn positive_trace_gives_zero(
            d in proptest::array::uniform3(-10.0f64..10.0),
            o in proptest::array::uniform3(-10.0f64..10.0),
        ) {
            let m = [[d[0], o[0], o[1]], [o[0], d[1], o[2]], [o[1], o[2], d[2]]];
            let trace = d[0] + d[1] + d[2];
            let f = frangi_value(symmetric_eigenvalues(&m), &FrangiParams::default());
            if trace > 1e-6 * (d[0].abs() + d[1].abs() + d[2].abs()) {
                prop_assert_eq!(f, 0.0);
            }
        }

        #[test]
        fn response_in_unit_interval(
            a in -1e3f64..1e3, b in -1e3f64..1e3, c in -1e3f64..1e3,
            alpha in 0.1f64..2.0, beta in 0.1f64..2.0, cc in 0.1f64..50.0,
        ) {
            let mut ev = [a, b, c];
            crate::filters::eigen::sort_by_magnitude(&mut ev);
            let p = FrangiParams { alpha, beta, c: cc, ..FrangiParams::default() };
            let f = frangi_value(ev, &p);
            prop_assert!((0.0..1.0).contains(&f));
        }

        #[test]
        fn adding_a_scale_never_decreases(extra in 2usize..6) {
            let v = bump(Dims::cube(16), [7.5, 8.0, 8.0], 2.0, 1.0);
            let base = FrangiParams::with_sigmas(vec![1.0, 2.0]);
            let mut more = base.clone();
            more.sigmas.push(extra as f64);
            more.sigmas.sort_by(f64::total_cmp);
            more.sigmas.dedup();
            let a = multiscale_frangi(&v, &base).unwrap();
            let b = multiscale_frangi(&v, &more).unwrap();
            prop_assert!(a.data().iter().zip(b.data()).all(|(x, y)| y >= x));
        }
    }
}
