//! End-to-end fixture: ground truth, predictions and one synthetic
//! attribution map per (POI, patch) pair, laid out per the file naming
//! contract.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Phantom;
use crate::error::{Error, Result};
use crate::graph::{build_graph, select_pois, skeletonize, Poi};
use crate::io::{write_volume, Format};
use crate::patch::{PatchGrid, DEFAULT_OVERLAP, DEFAULT_PATCH_SIZE};
use crate::pipeline::naming::{attribution_file_name, prediction_file_name};
use crate::volume::{Volume, VolumeKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttributionFixture {
    pub patch_size: usize,
    pub overlap: f64,
    /// Width and height of the bump placed at each POI.
    pub sigma: f64,
    pub amplitude: f64,
    pub noise_std: f64,
    /// Write `pred_<ix>_<iy>_<iz>.nii` files instead of one volume.
    pub per_patch_predictions: bool,
}

impl Default for AttributionFixture {
    fn default() -> Self {
        AttributionFixture {
            patch_size: DEFAULT_PATCH_SIZE,
            overlap: DEFAULT_OVERLAP,
            sigma: 3.0,
            amplitude: 1.0,
            noise_std: 0.0,
            per_patch_predictions: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub image: PathBuf,
    pub gt: PathBuf,
    /// A volume file, or a directory of per-patch files.
    pub prediction: PathBuf,
    pub attribution_dir: PathBuf,
    pub grid: PatchGrid,
    pub pois: Vec<Poi>,
    pub maps_written: usize,
}

fn pair_seed(seed: u64, poi: usize, code: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((poi as u64) << 32) ^ code as u64
}

/// Writes `image.nii`, `gt.nii`, predictions equal to the ground truth and
/// a bump-at-POI attribution map for every (POI, patch) membership.
pub fn write_dataset(phantom: &Phantom, fixture: &AttributionFixture, seed: u64, dir: &Path) -> Result<Dataset> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let dims = phantom.gt.dims();
    let grid = PatchGrid::new(dims, fixture.patch_size, fixture.overlap)?;
    if !(fixture.sigma > 0.0 && fixture.noise_std >= 0.0) {
        return Err(Error::InvalidParameter("fixture sigma must be > 0 and noise_std >= 0".into()));
    }

    let image = dir.join("image.nii");
    let gt = dir.join("gt.nii");
    write_volume(&phantom.image, &image, Format::Nifti)?;
    write_volume(&phantom.gt, &gt, Format::Nifti)?;

    let prediction = if fixture.per_patch_predictions {
        let pdir = dir.join("predictions");
        fs::create_dir_all(&pdir).map_err(|e| Error::io(&pdir, e))?;
        for idx in grid.indices() {
            let patch = grid.extract(&phantom.gt, idx)?;
            write_volume(&patch, pdir.join(prediction_file_name(idx)), Format::Nifti)?;
        }
        pdir
    } else {
        let p = dir.join("prediction.nii");
        write_volume(&phantom.gt, &p, Format::Nifti)?;
        p
    };

    let graph = build_graph(&skeletonize(&phantom.gt));
    let pois = select_pois(&graph, &phantom.gt, &grid)?;
    let attribution_dir = dir.join("attributions");
    fs::create_dir_all(&attribution_dir).map_err(|e| Error::io(&attribution_dir, e))?;
    let pdims = grid.patch_dims();
    let normal = (fixture.noise_std > 0.0).then(|| Normal::new(0.0, fixture.noise_std).expect("finite std"));
    let mut maps_written = 0;
    for poi in &pois {
        for &idx in &poi.patch_memberships {
            let c = grid.to_local(idx, poi.position)?.map(|v| v as f64);
            let mut rng = ChaCha8Rng::seed_from_u64(pair_seed(seed, poi.id, idx.ix * 1_000_000 + idx.iy * 1000 + idx.iz));
            let map = Volume::from_fn(pdims, VolumeKind::Attribution, |p| {
                let d2: f64 = (0..3).map(|k| (p[k] as f64 - c[k]).powi(2)).sum();
                let mut v = fixture.amplitude * (-d2 / (2.0 * fixture.sigma * fixture.sigma)).exp();
                if let Some(n) = &normal {
                    v += n.sample(&mut rng);
                }
                v as f32
            });
            write_volume(&map, attribution_dir.join(attribution_file_name(poi.id, idx)), Format::Nifti)?;
            maps_written += 1;
        }
    }
    Ok(Dataset {
        image,
        gt,
        prediction,
        attribution_dir,
        grid,
        pois,
        maps_written,
    })
}
