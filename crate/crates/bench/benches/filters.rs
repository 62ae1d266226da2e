use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use vesselxai::blob::{detect_blobs, BlobDetectorParams};
use vesselxai::features::edt;
use vesselxai::filters::{frangi_at_scale, gaussian_hessian, FrangiParams};
use vesselxai::graph::{build_graph, skeletonize};
use vesselxai_bench::{bump_map, tube_mask};

fn hessian(c: &mut Criterion) {
    let v = bump_map(64, 4.0);
    let mut g = c.benchmark_group("gaussian_hessian_64");
    for sigma in [2.0, 8.0, 16.0] {
        g.bench_with_input(BenchmarkId::from_parameter(sigma), &sigma, |b, &s| {
            b.iter(|| gaussian_hessian(&v, s).unwrap())
        });
    }
    g.finish();
}

fn frangi(c: &mut Criterion) {
    let v = bump_map(64, 4.0);
    let p = FrangiParams::default();
    c.bench_function("frangi_single_scale_64", |b| b.iter(|| frangi_at_scale(&v, 4.0, &p).unwrap()));
    let mut g = c.benchmark_group("detect_blobs_64");
    g.sample_size(10);
    g.bench_function("default_params", |b| b.iter(|| detect_blobs(&v, &BlobDetectorParams::default()).unwrap()));
    g.finish();
}

fn morphology(c: &mut Criterion) {
    let m = tube_mask(64, 4, 1);
    c.bench_function("edt_64", |b| b.iter(|| edt(&m)));
    let mut g = c.benchmark_group("skeleton_64");
    g.sample_size(10);
    g.bench_function("skeletonize", |b| b.iter(|| skeletonize(&m)));
    let s = skeletonize(&m);
    g.bench_function("build_graph", |b| b.iter(|| build_graph(&s)));
    g.finish();
}

criterion_group!(benches, hessian, frangi, morphology);
criterion_main!(benches);
