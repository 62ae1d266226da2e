//! Inputs shared by the criterion benches.

use vesselxai::phantom::{generate_phantom, PhantomSpec, Shape};
use vesselxai::{Dims, Mask, Volume};

/// A `n³` attribution-like map with one Gaussian bump in the middle.
pub fn bump_map(n: usize, sigma: f64) -> Volume<f32> {
    let c = (n / 2) as f64;
    let spec = PhantomSpec::new(
        Dims::cube(n),
        vec![Shape::GaussianBump { center: [c; 3], sigma, amplitude: 1.0 }],
    );
    generate_phantom(&spec).expect("valid bump").image
}

/// A `n³` mask holding a union of random tubes.
pub fn tube_mask(n: usize, tubes: usize, seed: u64) -> Mask {
    generate_phantom(&PhantomSpec::random_tube_union(Dims::cube(n), tubes, seed))
        .expect("valid tubes")
        .gt
}
