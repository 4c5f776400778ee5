//! Semi-Lagrangian transport of the target distribution: Halton seeding of
//! splash polygons, tracer advection, and kernel density estimation back onto
//! the grid.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::domain::{Domain, ScalarField};
use crate::flow::{integrate, IntegrationOptions, VelocityField};
use crate::geom::{Polygon, Vec2};
use crate::{Error, Result};

/// Kernel support radius in bandwidths.
const TRUNCATION_SIGMAS: f64 = 4.0;

/// Radical-inverse (van der Corput) value of `index` in the given base.
/// Index 1 is the first point of the sequence.
pub fn halton(index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let mut i = index;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// The initial uncertainty polygon for the target's entry point, with the
/// splash time.
#[derive(Clone, Debug, PartialEq)]
pub struct SplashRegion {
    pub polygon: Polygon,
    pub t0_hours: f64,
}

impl SplashRegion {
    pub fn new(polygon: Polygon, t0_hours: f64) -> Result<Self> {
        if polygon.vertices().len() < 3 || polygon.area() <= 0.0 {
            return Err(Error::config(
                "splash region polygon must be simple with positive area",
            ));
        }
        if !polygon.is_convex() {
            return Err(Error::config("splash region polygon must be convex"));
        }
        Ok(SplashRegion { polygon, t0_hours })
    }
}

/// Equal-weight Lagrangian particle set carrying the target distribution.
/// Each tracer has weight `1/n`.
#[derive(Clone, Debug, PartialEq)]
pub struct TracerEnsemble {
    positions: Vec<Vec2>,
    pub epoch_hours: f64,
}

impl TracerEnsemble {
    pub fn new(positions: Vec<Vec2>, epoch_hours: f64) -> Result<Self> {
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::config("tracer position not finite"));
        }
        Ok(TracerEnsemble {
            positions,
            epoch_hours,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vec2] {
        &self.positions
    }

    pub fn weight(&self) -> f64 {
        if self.positions.is_empty() {
            0.0
        } else {
            1.0 / self.positions.len() as f64
        }
    }

    /// Mean tracer position (centroid of the carried distribution).
    pub fn centroid(&self) -> Vec2 {
        let mut c = Vec2::ZERO;
        for p in &self.positions {
            c += *p;
        }
        if self.positions.is_empty() {
            c
        } else {
            c / self.positions.len() as f64
        }
    }

    /// Dump as `id,x_km,y_km,weight` CSV with the epoch in a header comment.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let w = self.weight();
        let epoch = self.epoch_hours;
        crate::io::atomic_write(path, |out| {
            writeln!(out, "# epoch_hours={epoch}")?;
            writeln!(out, "id,x_km,y_km,weight")?;
            for (i, p) in self.positions.iter().enumerate() {
                writeln!(out, "{i},{},{},{w}", p.x, p.y)?;
            }
            Ok(())
        })
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut epoch = 0.0;
        let mut positions = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("epoch_hours=") {
                    epoch = v.trim().parse().map_err(|_| Error::Parse {
                        line: lineno + 1,
                        message: format!("bad epoch value: {v}"),
                    })?;
                }
                continue;
            }
            if line.starts_with("id,") {
                continue;
            }
            let mut parts = line.split(',');
            let mut field = |name: &str| -> Result<f64> {
                parts
                    .next()
                    .ok_or_else(|| Error::Parse {
                        line: lineno + 1,
                        message: format!("missing {name}"),
                    })?
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse {
                        line: lineno + 1,
                        message: format!("bad {name}"),
                    })
            };
            let _id = field("id")?;
            let x = field("x_km")?;
            let y = field("y_km")?;
            positions.push(Vec2::new(x, y));
        }
        TracerEnsemble::new(positions, epoch)
    }
}

/// Seeds `n` tracers in the region with the (2,3)-Halton sequence mapped into
/// the polygon's bounding box and rejection-sampled into the polygon; the
/// Halton index keeps advancing across rejections so accepted points stay
/// low-discrepancy.
pub fn seed_halton(region: &SplashRegion, n: usize) -> Result<TracerEnsemble> {
    if n == 0 {
        return TracerEnsemble::new(Vec::new(), region.t0_hours);
    }
    let (lo, hi) = region.polygon.bounding_box();
    let span = hi - lo;
    if span.x <= 0.0 || span.y <= 0.0 {
        return Err(Error::config("splash polygon bounding box is degenerate"));
    }
    let mut positions = Vec::with_capacity(n);
    let mut index = 1u64;
    // area ratio bounds expected rejections; 64x slack before giving up
    let max_index = 64 * (n as u64 + 16) * ((span.x * span.y / region.polygon.area()) as u64 + 1);
    while positions.len() < n {
        if index > max_index {
            return Err(Error::config(
                "halton rejection sampling exceeded iteration budget; polygon too thin?",
            ));
        }
        let p = Vec2::new(
            lo.x + span.x * halton(index, 2),
            lo.y + span.y * halton(index, 3),
        );
        if region.polygon.contains(p) {
            positions.push(p);
        }
        index += 1;
    }
    TracerEnsemble::new(positions, region.t0_hours)
}

/// Merges ensembles into one with uniform weights (equal mass per source
/// ensemble requires equal tracer counts; callers seed that way).
pub fn merge_ensembles(parts: &[TracerEnsemble]) -> Result<TracerEnsemble> {
    let epoch = parts.first().map(|e| e.epoch_hours).unwrap_or(0.0);
    if parts.iter().any(|e| e.epoch_hours != epoch) {
        return Err(Error::config("cannot merge ensembles with different epochs"));
    }
    let mut positions = Vec::new();
    for part in parts {
        positions.extend_from_slice(part.positions());
    }
    TracerEnsemble::new(positions, epoch)
}

/// Moves every tracer with the flow map to `t_end`; weights unchanged.
pub fn advect(
    ensemble: &TracerEnsemble,
    field: &dyn VelocityField,
    t_end: f64,
    opts: IntegrationOptions,
) -> Result<TracerEnsemble> {
    if t_end < ensemble.epoch_hours {
        return Err(Error::config(format!(
            "advect target time {t_end} precedes ensemble epoch {}",
            ensemble.epoch_hours
        )));
    }
    let mut positions = Vec::with_capacity(ensemble.len());
    for (i, &p) in ensemble.positions.iter().enumerate() {
        let moved =
            integrate(field, p, ensemble.epoch_hours, t_end, opts).map_err(|e| match e {
                Error::Integration {
                    t_hours,
                    x,
                    y,
                    reason,
                } => Error::Integration {
                    t_hours,
                    x,
                    y,
                    reason: format!("tracer {i}: {reason}"),
                },
                other => other,
            })?;
        positions.push(moved);
    }
    TracerEnsemble::new(positions, t_end)
}

/// Splats one unit-mass kernel (possibly boundary-reflected) and returns the
/// un-normalized kernel sum it deposited.
fn splat_kernel(field: &mut ScalarField, center: Vec2, sigma: f64) {
    let radius = TRUNCATION_SIGMAS * sigma;
    let d = field.domain;
    // mirror images about any boundary within kernel reach keep the estimate
    // unbiased for mass near the walls
    let mut centers = [center; 4];
    let mut n_centers = 1;
    let reflect_x = if center.x - d.x_min < radius {
        Some(2.0 * d.x_min - center.x)
    } else if d.x_max - center.x < radius {
        Some(2.0 * d.x_max - center.x)
    } else {
        None
    };
    let reflect_y = if center.y - d.y_min < radius {
        Some(2.0 * d.y_min - center.y)
    } else if d.y_max - center.y < radius {
        Some(2.0 * d.y_max - center.y)
    } else {
        None
    };
    if let Some(rx) = reflect_x {
        centers[n_centers] = Vec2::new(rx, center.y);
        n_centers += 1;
    }
    if let Some(ry) = reflect_y {
        centers[n_centers] = Vec2::new(center.x, ry);
        n_centers += 1;
    }
    if let (Some(rx), Some(ry)) = (reflect_x, reflect_y) {
        centers[n_centers] = Vec2::new(rx, ry);
        n_centers += 1;
    }
    for &c in &centers[..n_centers] {
        splat_truncated_gaussian(field, c, sigma, 1.0);
    }
}

/// Adds `scale`·exp(-r²/2σ²) over cells within the truncation radius.
/// Separable row/column weights keep exp() out of the inner loop.
pub(crate) fn splat_truncated_gaussian(
    field: &mut ScalarField,
    center: Vec2,
    sigma: f64,
    scale: f64,
) {
    let radius = TRUNCATION_SIGMAS * sigma;
    let r_sq = radius * radius;
    let dx = field.cell_dx();
    let dy = field.cell_dy();
    let d = field.domain;
    let ix_lo = (((center.x - radius) - d.x_min) / dx).floor().max(0.0) as usize;
    let ix_hi = ((((center.x + radius) - d.x_min) / dx).ceil() as usize).min(field.nx);
    let iy_lo = (((center.y - radius) - d.y_min) / dy).floor().max(0.0) as usize;
    let iy_hi = ((((center.y + radius) - d.y_min) / dy).ceil() as usize).min(field.ny);
    if ix_lo >= ix_hi || iy_lo >= iy_hi {
        return;
    }
    let inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
    let mut wx = Vec::with_capacity(ix_hi - ix_lo);
    let mut dx_sq = Vec::with_capacity(ix_hi - ix_lo);
    for ix in ix_lo..ix_hi {
        let cx = d.x_min + (ix as f64 + 0.5) * dx;
        let dd = (cx - center.x) * (cx - center.x);
        dx_sq.push(dd);
        wx.push((-dd * inv_two_sigma_sq).exp());
    }
    for iy in iy_lo..iy_hi {
        let cy = d.y_min + (iy as f64 + 0.5) * dy;
        let dy_sq = (cy - center.y) * (cy - center.y);
        if dy_sq > r_sq {
            continue;
        }
        let wy = (-dy_sq * inv_two_sigma_sq).exp();
        let row = iy * field.nx;
        let values = field.values_mut();
        for (k, ix) in (ix_lo..ix_hi).enumerate() {
            if dx_sq[k] + dy_sq <= r_sq {
                values[row + ix] += scale * wx[k] * wy;
            }
        }
    }
}

/// Estimates the probability density `p` on a grid with a truncated-Gaussian
/// kernel of the given bandwidth (truncation at 4 bandwidths, boundary mass
/// mirrored back in), renormalized so the grid integral is exactly 1.
pub fn density(
    ensemble: &TracerEnsemble,
    domain: Domain,
    nx: usize,
    ny: usize,
    bandwidth_km: f64,
) -> Result<ScalarField> {
    if bandwidth_km <= 0.0 {
        return Err(Error::config("density bandwidth must be positive"));
    }
    if ensemble.is_empty() {
        return Err(Error::Degenerate(
            "density of an empty ensemble is undefined".into(),
        ));
    }
    let mut field = ScalarField::zeros(domain, nx, ny)?;
    for &p in ensemble.positions() {
        if domain.contains(p) {
            splat_kernel(&mut field, p, bandwidth_km);
        } else {
            // guarded edge case: out-of-domain tracers contribute whatever
            // kernel tail still reaches the grid
            splat_truncated_gaussian(&mut field, p, bandwidth_km, 1.0);
        }
    }
    let total = field.integrate();
    if total <= 0.0 {
        return Err(Error::Degenerate(
            "all tracers are outside kernel range of the grid".into(),
        ));
    }
    field.scale(1.0 / total);
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::AnalyticFlow;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn unit_square_region() -> SplashRegion {
        SplashRegion::new(
            Polygon::new(vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(1.0, 1.0),
                Vec2::new(0.0, 1.0),
            ])
            .unwrap(),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn halton_first_points() {
        assert_relative_eq!(halton(1, 2), 0.5);
        assert_relative_eq!(halton(2, 2), 0.25);
        assert_relative_eq!(halton(3, 2), 0.75);
        assert_relative_eq!(halton(1, 3), 1.0 / 3.0);
        assert_relative_eq!(halton(2, 3), 2.0 / 3.0);
        assert_relative_eq!(halton(3, 3), 1.0 / 9.0);
    }

    #[test]
    fn seed_zero_is_empty() {
        let e = seed_halton(&unit_square_region(), 0).unwrap();
        assert!(e.is_empty());
        assert_eq!(e.weight(), 0.0);
    }

    #[test]
    fn seed_three_in_unit_square() {
        let e = seed_halton(&unit_square_region(), 3).unwrap();
        let expect = [
            Vec2::new(0.5, 1.0 / 3.0),
            Vec2::new(0.25, 2.0 / 3.0),
            Vec2::new(0.75, 1.0 / 9.0),
        ];
        for (got, want) in e.positions().iter().zip(&expect) {
            assert_relative_eq!(got.x, want.x, epsilon = 1e-15);
            assert_relative_eq!(got.y, want.y, epsilon = 1e-15);
        }
    }

    /// Star-discrepancy estimate over random anchored boxes.
    fn discrepancy(points: &[Vec2], rng: &mut impl Rng) -> f64 {
        let n = points.len() as f64;
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let bx: f64 = rng.gen();
            let by: f64 = rng.gen();
            let count = points.iter().filter(|p| p.x < bx && p.y < by).count() as f64;
            worst = worst.max((count / n - bx * by).abs());
        }
        worst
    }

    #[test]
    fn halton_beats_pseudorandom_discrepancy() {
        use rand::SeedableRng;
        let e = seed_halton(&unit_square_region(), 1024).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let random: Vec<Vec2> = (0..1024)
            .map(|_| Vec2::new(rng.gen(), rng.gen()))
            .collect();
        let mut box_rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let d_halton = discrepancy(e.positions(), &mut box_rng);
        let mut box_rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let d_random = discrepancy(&random, &mut box_rng);
        assert!(
            d_halton < d_random,
            "halton discrepancy {d_halton} should beat random {d_random}"
        );
    }

    #[test]
    fn seeding_rejects_degenerate_polygon() {
        let thin = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(2.0, 0.0),
        ])
        .unwrap();
        assert!(SplashRegion::new(thin, 0.0).is_err());
    }

    #[test]
    fn advect_uniform_shifts_everything() {
        let e = seed_halton(&unit_square_region(), 16).unwrap();
        let f = AnalyticFlow::Uniform { u: 3.0, v: -1.0 };
        let moved = advect(&e, &f, 2.0, IntegrationOptions::default()).unwrap();
        assert_eq!(moved.epoch_hours, 2.0);
        for (a, b) in e.positions().iter().zip(moved.positions()) {
            assert_relative_eq!(b.x, a.x + 6.0, epsilon = 1e-9);
            assert_relative_eq!(b.y, a.y - 2.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn advect_rotation_period_restores_positions() {
        let e = seed_halton(&unit_square_region(), 32).unwrap();
        let omega = 0.5;
        let f = AnalyticFlow::Rotation {
            omega,
            center: Vec2::new(0.5, 0.5),
        };
        let period = 2.0 * std::f64::consts::PI / omega;
        let moved = advect(&e, &f, period, IntegrationOptions::with_tol(1e-9)).unwrap();
        for (a, b) in e.positions().iter().zip(moved.positions()) {
            assert!(a.dist(*b) < 1e-5, "orbit error {}", a.dist(*b));
        }
    }

    #[test]
    fn density_single_tracer_integrates_to_one() {
        let d = Domain::new(0.0, 100.0, 0.0, 100.0).unwrap();
        let e = TracerEnsemble::new(vec![Vec2::new(50.0, 50.0)], 0.0).unwrap();
        let p = density(&e, d, 64, 64, 3.0).unwrap();
        assert_relative_eq!(p.integrate(), 1.0, epsilon = 1e-9);
        // radial symmetry: compare the four axis neighbours at equal offsets
        let c = 32;
        let v1 = p.get(c + 2, 31);
        let v2 = p.get(c - 3, 31);
        assert_relative_eq!(v1, v2, max_relative = 1e-9);
    }

    #[test]
    fn density_two_far_tracers_split_mass() {
        let d = Domain::new(0.0, 200.0, 0.0, 100.0).unwrap();
        let e = TracerEnsemble::new(vec![Vec2::new(50.0, 50.0), Vec2::new(150.0, 50.0)], 0.0)
            .unwrap();
        let p = density(&e, d, 128, 64, 3.0).unwrap();
        // sum the left half
        let mut left = 0.0;
        for iy in 0..64 {
            for ix in 0..64 {
                left += p.get(ix, iy);
            }
        }
        left *= p.cell_area();
        assert_relative_eq!(left, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn density_of_uniform_tracers_is_nearly_uniform() {
        let d = Domain::new(0.0, 100.0, 0.0, 100.0).unwrap();
        let region = SplashRegion::new(
            Polygon::new(vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(100.0, 0.0),
                Vec2::new(100.0, 100.0),
                Vec2::new(0.0, 100.0),
            ])
            .unwrap(),
            0.0,
        )
        .unwrap();
        let e = seed_halton(&region, 100_000).unwrap();
        let p = density(&e, d, 64, 64, 3.0).unwrap();
        let uniform = 1.0 / d.area();
        let mut worst = 0.0f64;
        for v in p.values() {
            worst = worst.max((v - uniform).abs() / uniform);
        }
        assert!(
            worst < 0.10,
            "max relative deviation from uniform = {worst}"
        );
        assert_relative_eq!(p.integrate(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn density_of_empty_ensemble_is_degenerate() {
        let d = Domain::new(0.0, 1.0, 0.0, 1.0).unwrap();
        let e = TracerEnsemble::new(vec![], 0.0).unwrap();
        assert!(matches!(
            density(&e, d, 8, 8, 1.0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn csv_roundtrip_preserves_ensemble() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tracers.csv");
        let e = seed_halton(&unit_square_region(), 20).unwrap();
        let e = TracerEnsemble::new(e.positions().to_vec(), 13.5).unwrap();
        e.write_csv(&path).unwrap();
        let back = TracerEnsemble::read_csv(&path).unwrap();
        assert_eq!(back.epoch_hours, 13.5);
        assert_eq!(back.len(), 20);
        for (a, b) in e.positions().iter().zip(back.positions()) {
            assert_relative_eq!(a.x, b.x, epsilon = 1e-12);
            assert_relative_eq!(a.y, b.y, epsilon = 1e-12);
        }
    }
}
