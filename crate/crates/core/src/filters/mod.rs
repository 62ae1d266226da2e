//! Gaussian scale-space Hessian analysis: eigenvalues, Frangi vesselness
//! and the tubularity average.

mod eigen;
mod frangi;
mod gaussian;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Volume, VolumeKind};

pub use eigen::{hessian_eigenvalues, sort_by_magnitude, symmetric_eigenvalues, EigenField};
pub use frangi::{frangi_at_scale, frangi_response, frangi_value, multiscale_frangi, EPS};
pub use gaussian::{
    convolve_axis, gaussian_hessian, gaussian_kernels, gaussian_smooth, HessianField, Kernel, MIN_SIGMA, TRUNCATE,
};

/// Which structures count as ridges: bright on dark (`White`) or dark on
/// bright (`Black`, equivalent to filtering the negated volume).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RidgeMode {
    #[default]
    White,
    Black,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrangiParams {
    pub alpha: f64,
    pub beta: f64,
    pub c: f64,
    /// Ascending Gaussian scales in voxels.
    pub sigmas: Vec<f64>,
    pub ridge_mode: RidgeMode,
    /// Use `1 - exp(-Rb²/2β²)` instead of `exp(-Rb²/2β²)`.
    pub invert_blob_term: bool,
}

impl Default for FrangiParams {
    fn default() -> Self {
        FrangiParams {
            alpha: 0.5,
            beta: 0.5,
            c: 15.0,
            sigmas: (2..=16).map(f64::from).collect(),
            ridge_mode: RidgeMode::White,
            invert_blob_term: false,
        }
    }
}

impl FrangiParams {
    pub fn with_sigmas(sigmas: Vec<f64>) -> Self {
        FrangiParams {
            sigmas,
            ..FrangiParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("c", self.c)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("frangi.{name} must be > 0, got {v}")));
            }
        }
        if self.sigmas.is_empty() {
            return Err(Error::InvalidParameter("frangi.sigmas is empty".into()));
        }
        if let Some(s) = self.sigmas.iter().find(|s| !(**s >= MIN_SIGMA && s.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "frangi.sigmas contains {s}, below the minimum {MIN_SIGMA}"
            )));
        }
        if self.sigmas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("frangi.sigmas must be strictly ascending".into()));
        }
        Ok(())
    }
}

/// A filter whose output can be read as a per-voxel tubularity score.
pub trait VesselnessFilter: Send + Sync {
    fn name(&self) -> &str;
    fn response(&self, v: &Volume<f32>) -> Result<Volume<f32>>;
}

#[derive(Clone, Debug, Default)]
pub struct FrangiFilter {
    pub params: FrangiParams,
}

impl VesselnessFilter for FrangiFilter {
    fn name(&self) -> &str {
        "frangi"
    }

    fn response(&self, v: &Volume<f32>) -> Result<Volume<f32>> {
        multiscale_frangi(v, &self.params)
    }
}

/// Min-max normalization to `[0, 1]`; a constant input maps to zeros.
pub fn min_max_normalize(v: &Volume<f32>) -> Volume<f32> {
    match v.min_max() {
        Some((lo, hi)) if hi > lo => {
            let range = hi - lo;
            v.map(VolumeKind::Response, |x| ((x - lo) / range).clamp(0.0, 1.0))
        }
        _ => Volume::zeros(v.dims(), VolumeKind::Response).with_spacing(v.spacing()),
    }
}

/// Average of the min-max normalized responses of `filters`.
pub fn tubularity(v: &Volume<f32>, filters: &[Box<dyn VesselnessFilter>]) -> Result<Volume<f32>> {
    if filters.is_empty() {
        return Err(Error::InvalidParameter("tubularity needs at least one filter".into()));
    }
    let mut acc = vec![0f64; v.len()];
    for f in filters {
        let r = min_max_normalize(&f.response(v)?);
        for (a, &x) in acc.iter_mut().zip(r.data()) {
            *a += x as f64;
        }
    }
    let n = filters.len() as f64;
    let data = acc.into_iter().map(|a| (a / n) as f32).collect();
    Ok(Volume::from_vec(v.dims(), data, VolumeKind::Response)?.with_spacing(v.spacing()))
}

pub fn default_vesselness_filters() -> Vec<Box<dyn VesselnessFilter>> {
    vec![Box::new(FrangiFilter::default())]
}
