use criterion::{black_box, criterion_group, criterion_main, Criterion};

use driftsearch_bench::{bench_domain, bench_gyre, bench_tracers};
use driftsearch_core::control::AgentState;
use driftsearch_core::coverage::CoverageState;
use driftsearch_core::flow::{integrate, IntegrationOptions};
use driftsearch_core::geom::Vec2;
use driftsearch_core::search_theory::solve_alpha;
use driftsearch_core::spectral::SpectralBasis;
use driftsearch_core::transport::{advect, density};

fn bench_transform(c: &mut Criterion) {
    let domain = bench_domain();
    let basis = SpectralBasis::new(domain, 32, -0.5).unwrap();
    let field = density(&bench_tracers(10_000), domain, 128, 128, 3.0).unwrap();
    c.bench_function("spectral_transform_128x128_k32", |b| {
        b.iter(|| basis.transform(black_box(&field)).unwrap())
    });
}

fn bench_density(c: &mut Criterion) {
    let domain = bench_domain();
    let tracers = bench_tracers(10_000);
    c.bench_function("density_10k_tracers_128x128", |b| {
        b.iter(|| density(black_box(&tracers), domain, 128, 128, 3.0).unwrap())
    });
}

fn bench_advect_step(c: &mut Criterion) {
    let domain = bench_domain();
    let gyre = bench_gyre(domain);
    let tracers = bench_tracers(10_000);
    let opts = IntegrationOptions::default();
    c.bench_function("advect_10k_tracers_one_minute", |b| {
        b.iter(|| advect(black_box(&tracers), &gyre, 1.0 / 60.0, opts).unwrap())
    });
}

fn bench_long_integration(c: &mut Criterion) {
    let domain = bench_domain();
    let gyre = bench_gyre(domain);
    let opts = IntegrationOptions::default();
    c.bench_function("flow_map_240h", |b| {
        b.iter(|| integrate(&gyre, black_box(Vec2::new(150.0, 120.0)), 0.0, 240.0, opts).unwrap())
    });
}

fn bench_alpha(c: &mut Criterion) {
    let domain = bench_domain();
    let p = density(&bench_tracers(10_000), domain, 128, 128, 3.0).unwrap();
    c.bench_function("solve_alpha_128x128", |b| {
        b.iter(|| solve_alpha(black_box(&p), 60.0, None).unwrap())
    });
}

fn bench_smooth(c: &mut Criterion) {
    let domain = bench_domain();
    let mut coverage = CoverageState::new(3.0).unwrap();
    let agents: Vec<AgentState> = (0..10)
        .map(|i| {
            AgentState::new(
                Vec2::new(120.0 + 35.0 * i as f64, 90.0 + 10.0 * i as f64),
                380.0,
                Vec2::new(1.0, 0.0),
            )
        })
        .collect();
    for _ in 0..540 {
        coverage.deposit(&agents, 1.0 / 60.0).unwrap();
    }
    c.bench_function("coverage_smooth_5400_particles_128x128", |b| {
        b.iter(|| coverage.smooth(domain, 128, 128).unwrap())
    });
}

criterion_group!(
    kernels,
    bench_transform,
    bench_density,
    bench_advect_step,
    bench_long_integration,
    bench_alpha,
    bench_smooth
);
criterion_main!(kernels);
