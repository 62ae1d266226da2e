//! Deterministic synthetic volumes: tubes, Y-junctions, spheres and
//! Gaussian bumps, with optional seeded noise.

mod dataset;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Dims, Mask, Volume, VolumeKind, Voxel};

pub use dataset::{write_dataset, AttributionFixture, Dataset};

/// Voxel centers on the boundary of a solid count as inside up to this
/// squared-distance slack.
const BOUNDARY_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    /// Flat-ended cylinder around the segment `start`–`end`.
    Tube { start: [f64; 3], end: [f64; 3], radius: f64 },
    /// Three tubes from `center` to each of `ends`, plus a ball at `center`.
    YJunction { center: [f64; 3], ends: [[f64; 3]; 3], radius: f64 },
    Sphere { center: [f64; 3], radius: f64 },
    /// Adds `amplitude · exp(−d²/2σ²)` to the image; not part of the mask.
    GaussianBump { center: [f64; 3], sigma: f64, amplitude: f64 },
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|k| (a[k] - b[k]).powi(2)).sum()
}

fn in_segment(p: [f64; 3], a: [f64; 3], b: [f64; 3], radius: f64) -> bool {
    let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let len2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    let w = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
    let dot = w[0] * d[0] + w[1] * d[1] + w[2] * d[2];
    if len2 == 0.0 {
        return dist2(p, a) <= radius * radius + BOUNDARY_SLACK;
    }
    let t = dot / len2;
    if !(-BOUNDARY_SLACK..=1.0 + BOUNDARY_SLACK).contains(&t) {
        return false;
    }
    let perp2 = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]) - dot * dot / len2;
    perp2 <= radius * radius + BOUNDARY_SLACK
}

impl Shape {
    pub fn kind(&self) -> &'static str {
        match self {
            Shape::Tube { .. } => "tube",
            Shape::YJunction { .. } => "y_junction",
            Shape::Sphere { .. } => "sphere",
            Shape::GaussianBump { .. } => "gaussian_bump",
        }
    }

    pub fn is_solid(&self) -> bool {
        !matches!(self, Shape::GaussianBump { .. })
    }

    /// Whether the point lies inside the solid; bumps contain nothing.
    pub fn contains(&self, p: [f64; 3]) -> bool {
        match *self {
            Shape::Tube { start, end, radius } => in_segment(p, start, end, radius),
            Shape::YJunction { center, ends, radius } => {
                dist2(p, center) <= radius * radius + BOUNDARY_SLACK
                    || ends.iter().any(|&e| in_segment(p, center, e, radius))
            }
            Shape::Sphere { center, radius } => dist2(p, center) <= radius * radius + BOUNDARY_SLACK,
            Shape::GaussianBump { .. } => false,
        }
    }

    pub fn intensity(&self, p: [f64; 3]) -> f64 {
        match *self {
            Shape::GaussianBump { center, sigma, amplitude } => amplitude * (-dist2(p, center) / (2.0 * sigma * sigma)).exp(),
            _ => 0.0,
        }
    }

    /// Closed-form volume of the solid, ignoring overlaps between parts.
    pub fn analytic_volume(&self) -> f64 {
        use std::f64::consts::PI;
        match *self {
            Shape::Tube { start, end, radius } => PI * radius * radius * dist2(start, end).sqrt(),
            Shape::YJunction { center, ends, radius } => {
                ends.iter().map(|&e| PI * radius * radius * dist2(center, e).sqrt()).sum()
            }
            Shape::Sphere { radius, .. } => 4.0 / 3.0 * PI * radius.powi(3),
            Shape::GaussianBump { .. } => 0.0,
        }
    }

    fn anchor_points(&self) -> Vec<[f64; 3]> {
        match self {
            Shape::Tube { start, end, .. } => vec![*start, *end],
            Shape::YJunction { center, ends, .. } => std::iter::once(*center).chain(ends.iter().copied()).collect(),
            Shape::Sphere { center, .. } | Shape::GaussianBump { center, .. } => vec![*center],
        }
    }

    fn validate(&self, dims: Dims) -> Result<()> {
        let size = dims.as_array();
        for p in self.anchor_points() {
            if (0..3).any(|k| !(p[k] >= 0.0 && p[k] <= (size[k] - 1) as f64)) {
                return Err(Error::InvalidParameter(format!(
                    "{} point {p:?} lies outside volume {size:?}",
                    self.kind()
                )));
            }
        }
        let size_ok = match *self {
            Shape::Tube { radius, .. } | Shape::YJunction { radius, .. } | Shape::Sphere { radius, .. } => {
                radius >= 0.0 && radius.is_finite()
            }
            Shape::GaussianBump { sigma, amplitude, .. } => sigma > 0.0 && amplitude.is_finite(),
        };
        if !size_ok {
            return Err(Error::InvalidParameter(format!("{} has an invalid size parameter", self.kind())));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub shapes: Vec<Shape>,
    /// Image value inside solids.
    #[serde(default = "default_foreground")]
    pub foreground: f64,
    /// Standard deviation of additive Gaussian noise.
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub seed: u64,
    /// When present, a per-(POI, patch) attribution dataset is written
    /// alongside the volumes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribution: Option<AttributionFixture>,
}

fn default_foreground() -> f64 {
    1.0
}

impl PhantomSpec {
    pub fn new(dims: Dims, shapes: Vec<Shape>) -> Self {
        PhantomSpec {
            dims: dims.as_array(),
            shapes,
            foreground: 1.0,
            noise_std: 0.0,
            seed: 0,
            attribution: None,
        }
    }

    /// `tube`, `sphere`, ... for one shape, `composite` for several.
    pub fn kind(&self) -> &'static str {
        match self.shapes.as_slice() {
            [one] => one.kind(),
            _ => "composite",
        }
    }

    /// Reference Y-junction in a 64³ volume: three radius-2 arms of length
    /// 24, 120° apart in the z = 32 plane.
    pub fn y_phantom() -> Self {
        let c = [32.0, 32.0, 32.0];
        let ends = [0.0f64, 120.0, 240.0].map(|deg: f64| {
            let t = deg.to_radians();
            [c[0] + 24.0 * t.cos(), c[1] + 24.0 * t.sin(), c[2]]
        });
        PhantomSpec::new(
            Dims::cube(64),
            vec![Shape::YJunction {
                center: c,
                ends,
                radius: 2.0,
            }],
        )
    }

    /// Union of `count` random tubes of radius 1–2.5 with endpoints kept
    /// `margin` voxels inside the volume.
    pub fn random_tube_union(dims: Dims, count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let margin = 4.0;
        let size = dims.as_array();
        let point = |rng: &mut ChaCha8Rng| -> [f64; 3] {
            std::array::from_fn(|k| rng.gen_range(margin..=(size[k] as f64 - 1.0 - margin)).round())
        };
        let shapes = (0..count)
            .map(|_| Shape::Tube {
                start: point(&mut rng),
                end: point(&mut rng),
                radius: rng.gen_range(1.0..2.5),
            })
            .collect();
        PhantomSpec {
            seed,
            ..PhantomSpec::new(dims, shapes)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomDescriptor {
    pub kind: String,
    pub shapes: Vec<Shape>,
    pub foreground_voxels: usize,
    pub analytic_volume: f64,
}

#[derive(Clone, Debug)]
pub struct Phantom {
    pub image: Volume<f32>,
    pub gt: Mask,
    pub descriptor: PhantomDescriptor,
}

fn center(p: Voxel) -> [f64; 3] {
    p.map(|c| c as f64)
}

/// Builds the image and mask. A voxel is foreground iff its center lies in
/// some solid; the image is `foreground` on the mask plus every bump plus
/// noise.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    let dims = Dims::from_array(spec.dims);
    if dims.is_empty() {
        return Err(Error::InvalidParameter(format!("phantom dims {:?} must be positive", spec.dims)));
    }
    if !(spec.noise_std >= 0.0 && spec.noise_std.is_finite()) {
        return Err(Error::InvalidParameter("noise_std must be >= 0".into()));
    }
    for s in &spec.shapes {
        s.validate(dims)?;
    }
    let solids: Vec<&Shape> = spec.shapes.iter().filter(|s| s.is_solid()).collect();
    let bumps: Vec<&Shape> = spec.shapes.iter().filter(|s| !s.is_solid()).collect();
    let gt = Mask::from_fn(dims, VolumeKind::BinaryMask, |p| solids.iter().any(|s| s.contains(center(p))) as u8);

    let normal = (spec.noise_std > 0.0).then(|| Normal::new(0.0, spec.noise_std).expect("finite std"));
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let image = Volume::from_fn(dims, VolumeKind::Intensity, |p| {
        let mut v = spec.foreground * gt.get(p) as f64;
        v += bumps.iter().map(|b| b.intensity(center(p))).sum::<f64>();
        if let Some(n) = &normal {
            v += n.sample(&mut rng);
        }
        v as f32
    });
    Ok(Phantom {
        descriptor: PhantomDescriptor {
            kind: spec.kind().to_string(),
            shapes: spec.shapes.clone(),
            foreground_voxels: gt.count(),
            analytic_volume: solids.iter().map(|s| s.analytic_volume()).sum(),
        },
        image,
        gt,
    })
}

/// Sets every voxel on the rounded straight path from `a` to `b`; the
/// result is 26-connected.
pub fn draw_line(mask: &mut Mask, a: Voxel, b: Voxel) {
    let steps = (0..3).map(|k| a[k].abs_diff(b[k])).max().unwrap_or(0);
    for i in 0..=steps {
        let t = if steps == 0 { 0.0 } else { i as f64 / steps as f64 };
        let p: Voxel = std::array::from_fn(|k| (a[k] as f64 + t * (b[k] as f64 - a[k] as f64)).round() as usize);
        mask.set(p, 1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn tube_volume_matches_digitization() {
        let (c, r) = ([7.3, 7.6], 3.0);
        let spec = PhantomSpec::new(
            Dims::new(50, 16, 16),
            vec![Shape::Tube { start: [5.0, c[0], c[1]], end: [44.0, c[0], c[1]], radius: r }],
        );
        let p = generate_phantom(&spec).unwrap();
        // lattice points of one cross-section times the 40 slices
        let disk = (0..16)
            .flat_map(|y| (0..16).map(move |z| (y as f64 - c[0]).powi(2) + (z as f64 - c[1]).powi(2)))
            .filter(|&d2| d2 <= r * r)
            .count();
        let oracle = disk * 40;
        let got = p.gt.count();
        assert!((got as f64 - oracle as f64).abs() <= 0.02 * oracle as f64, "{got} vs {oracle}");
        let analytic = PI * r * r * 39.0;
        assert!((p.descriptor.analytic_volume - analytic).abs() < 1e-9);
        assert!((got as f64 / 40.0 - PI * r * r).abs() / (PI * r * r) < 0.1);
        assert_eq!(p.descriptor.kind, "tube");
    }

    #[test]
    fn bump_max_at_center() {
        let spec = PhantomSpec::new(
            Dims::cube(33),
            vec![Shape::GaussianBump { center: [16.0, 12.0, 20.0], sigma: 4.0, amplitude: 1.0 }],
        );
        let p = generate_phantom(&spec).unwrap();
        let argmax = (0..p.image.len()).max_by(|&a, &b| p.image.data()[a].total_cmp(&p.image.data()[b])).unwrap();
        assert_eq!(p.image.dims().coord(argmax), [16, 12, 20]);
        assert_eq!(p.image.get([16, 12, 20]), 1.0);
        assert_eq!(p.gt.count(), 0);
    }

    #[test]
    fn deterministic_with_seed() {
        let mut spec = PhantomSpec::random_tube_union(Dims::cube(24), 3, 9);
        spec.noise_std = 0.1;
        let a = generate_phantom(&spec).unwrap();
        let b = generate_phantom(&spec).unwrap();
        assert_eq!(a.image.data(), b.image.data());
        assert_eq!(a.gt.data(), b.gt.data());
        spec.seed = 10;
        assert_ne!(generate_phantom(&spec).unwrap().image.data(), a.image.data());
    }

    #[test]
    fn descriptor_agrees_with_mask() {
        let spec = PhantomSpec::new(
            Dims::cube(32),
            vec![
                Shape::Sphere { center: [10.0, 10.0, 10.0], radius: 4.0 },
                Shape::YJunction {
                    center: [20.0, 20.0, 16.0],
                    ends: [[30.0, 20.0, 16.0], [12.0, 28.0, 16.0], [12.0, 12.0, 16.0]],
                    radius: 1.5,
                },
            ],
        );
        let p = generate_phantom(&spec).unwrap();
        assert_eq!(p.descriptor.kind, "composite");
        for i in (0..p.gt.len()).step_by(7) {
            let q = p.gt.dims().coord(i);
            let inside = spec.shapes.iter().any(|s| s.contains(center(q)));
            assert_eq!(p.gt.is_set(q), inside);
        }
        assert!(p.gt.is_set([10, 10, 14]) && !p.gt.is_set([10, 10, 15]));
    }

    #[test]
    fn out_of_bounds_rejected() {
        let spec = PhantomSpec::new(Dims::cube(10), vec![Shape::Sphere { center: [12.0, 5.0, 5.0], radius: 1.0 }]);
        assert!(generate_phantom(&spec).is_err());
        let spec = PhantomSpec::new(Dims::cube(10), vec![Shape::GaussianBump { center: [5.0; 3], sigma: 0.0, amplitude: 1.0 }]);
        assert!(generate_phantom(&spec).is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = PhantomSpec::random_tube_union(Dims::new(20, 30, 40), 2, 1);
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"kind\":\"tube\""));
        assert_eq!(serde_json::from_str::<PhantomSpec>(&text).unwrap(), spec);
        assert!(serde_json::from_str::<PhantomSpec>(r#"{"dims":[4,4,4],"shapes":[],"extra":1}"#).is_err());
    }

    #[test]
    fn line_is_connected() {
        let mut m = Mask::empty(Dims::cube(20));
        draw_line(&mut m, [2, 3, 4], [17, 9, 5]);
        assert_eq!(m.count(), 16);
        assert_eq!(crate::neighborhood::count_components(&m, crate::neighborhood::Connectivity::TwentySix), 1);
    }
}
