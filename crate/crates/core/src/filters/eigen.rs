//! Closed-form eigenvalues of symmetric 3×3 matrices.

use rayon::prelude::*;

use super::gaussian::HessianField;
use crate::volume::Dims;

/// Eigenvalues of a symmetric matrix sorted by magnitude,
/// `|λ1| ≤ |λ2| ≤ |λ3|`.
///
/// Uses the trigonometric solution of the characteristic cubic, followed
/// by Newton polishing steps that are kept only when they reduce the
/// polynomial residual.
pub fn symmetric_eigenvalues(m: &[[f64; 3]; 3]) -> [f64; 3] {
    let (a, b, c) = (m[0][0], m[1][1], m[2][2]);
    let (d, e, f) = (m[0][1], m[0][2], m[1][2]);
    let off = d * d + e * e + f * f;
    let mut ev = if off == 0.0 {
        [a, b, c]
    } else {
        let q = (a + b + c) / 3.0;
        let (a0, b0, c0) = (a - q, b - q, c - q);
        let p2 = a0 * a0 + b0 * b0 + c0 * c0 + 2.0 * off;
        let p = (p2 / 6.0).sqrt();
        if p == 0.0 {
            [q, q, q]
        } else {
            let (ba, bb, bc) = (a0 / p, b0 / p, c0 / p);
            let (bd, be, bf) = (d / p, e / p, f / p);
            let det = ba * (bb * bc - bf * bf) - bd * (bd * bc - bf * be) + be * (bd * bf - bb * be);
            let r = (det / 2.0).clamp(-1.0, 1.0);
            let phi = r.acos() / 3.0;
            let l1 = q + 2.0 * p * phi.cos();
            let l3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
            let l2 = 3.0 * q - l1 - l3;
            let trace = a + b + c;
            let minors = a * b + a * c + b * c - off;
            let det = a * (b * c - f * f) - d * (d * c - f * e) + e * (d * f - b * e);
            [l1, l2, l3].map(|l| polish(l, trace, minors, det))
        }
    };
    sort_by_magnitude(&mut ev);
    ev
}

fn polish(mut l: f64, trace: f64, minors: f64, det: f64) -> f64 {
    let poly = |l: f64| ((l - trace) * l + minors) * l - det;
    let mut res = poly(l).abs();
    for _ in 0..2 {
        let slope = (3.0 * l - 2.0 * trace) * l + minors;
        if slope == 0.0 {
            break;
        }
        let next = l - poly(l) / slope;
        let r = poly(next).abs();
        if r < res {
            l = next;
            res = r;
        } else {
            break;
        }
    }
    l
}

/// Stable sort by absolute value; equal magnitudes keep their order.
pub fn sort_by_magnitude(ev: &mut [f64; 3]) {
    if ev[1].abs() < ev[0].abs() {
        ev.swap(0, 1);
    }
    if ev[2].abs() < ev[1].abs() {
        ev.swap(1, 2);
        if ev[1].abs() < ev[0].abs() {
            ev.swap(0, 1);
        }
    }
}

/// Per-voxel eigenvalue triples ordered by magnitude.
#[derive(Clone, Debug)]
pub struct EigenField {
    pub dims: Dims,
    pub values: Vec<[f64; 3]>,
}

pub fn hessian_eigenvalues(h: &HessianField) -> EigenField {
    let values = (0..h.len())
        .into_par_iter()
        .map(|i| symmetric_eigenvalues(&h.matrix(i)))
        .collect();
    EigenField { dims: h.dims, values }
}
