//! Shared fixtures for the kernel benchmarks.

use driftsearch_core::flow::AnalyticFlow;
use driftsearch_core::geom::{Polygon, Vec2};
use driftsearch_core::transport::{seed_halton, SplashRegion, TracerEnsemble};
use driftsearch_core::Domain;

pub fn bench_domain() -> Domain {
    Domain::new(0.0, 600.0, 0.0, 300.0).unwrap()
}

pub fn bench_gyre(domain: Domain) -> AnalyticFlow {
    AnalyticFlow::DoubleGyre {
        domain,
        amplitude: 120.0,
        epsilon: 0.25,
        omega: std::f64::consts::PI / 12.0,
    }
}

pub fn bench_tracers(n: usize) -> TracerEnsemble {
    let region = SplashRegion::new(
        Polygon::new(vec![
            Vec2::new(100.0, 80.0),
            Vec2::new(250.0, 80.0),
            Vec2::new(250.0, 200.0),
            Vec2::new(100.0, 200.0),
        ])
        .unwrap(),
        0.0,
    )
    .unwrap();
    seed_halton(&region, n).unwrap()
}
