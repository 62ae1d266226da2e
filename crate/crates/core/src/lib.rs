//! Explainability toolkit for 3D vessel segmentation models.
//!
//! The crate turns ground-truth vessel masks into vascular graphs and points
//! of interest (POIs), detects compact blobs of influence in per-POI
//! attribution maps with a multiscale Frangi detector, measures
//! patch-relative vessel features and correlates the two.
//!
//! Module map:
//!
//! - [`volume`], [`io`], [`patch`]: volumes, NIfTI / RAW files and the
//!   overlapping patch grid.
//! - [`graph`]: thinning, graph extraction, POI selection, prediction status.
//! - [`filters`]: Gaussian Hessian, eigenvalues, Frangi, tubularity.
//! - [`blob`]: Otsu threshold, component labeling, blob detection.
//! - [`features`]: EDT, exclusion spheres, relative connectivity.
//! - [`stats`]: descriptive statistics, Fisher CNR, Spearman, histograms.
//! - [`phantom`]: deterministic synthetic volumes.
//! - [`pipeline`]: configuration, batch run and report emission.

pub mod blob;
pub mod error;
pub mod features;
pub mod filters;
pub mod graph;
pub mod io;
pub mod neighborhood;
pub mod patch;
pub mod phantom;
pub mod pipeline;
pub mod stats;
pub mod volume;

pub use blob::{detect_blobs, Blob, BlobDetectorParams, BlobSet, Connectivity};
pub use error::{Error, Result};
pub use filters::{FrangiParams, RidgeMode};
pub use graph::{PoiKind, PredictionStatus, VesselGraph, Poi};
pub use patch::{PatchGrid, PatchIndex};
pub use volume::{Dims, Mask, Volume, VolumeKind, Voxel};
