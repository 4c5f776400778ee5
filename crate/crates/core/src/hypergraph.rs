//! Finite-time Lagrangian mixing diagnostic: partitions the domain into
//! rotation-dominated (mesoelliptic) and stretching-dominated
//! (mesohyperbolic) regions from the determinant of the finite-time averaged
//! velocity gradient.

use std::io::Write;
use std::path::Path;

use crate::domain::Domain;
use crate::flow::{integrate, IntegrationOptions, VelocityField};
use crate::geom::Vec2;
use crate::{Error, Result};

/// Finite-time mixing class of a grid cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MixingClass {
    /// `0 ≤ det ≤ 4/Δt²`: rotation-dominated.
    Mesoelliptic,
    /// `det < 0` or `det > 4/Δt²`: stretching in one direction, contraction
    /// in the other.
    Mesohyperbolic,
}

impl MixingClass {
    pub fn label(self) -> &'static str {
        match self {
            MixingClass::Mesoelliptic => "mesoelliptic",
            MixingClass::Mesohyperbolic => "mesohyperbolic",
        }
    }
}

/// Grid of mixing-class labels with the underlying determinant values.
#[derive(Clone, Debug)]
pub struct HypergraphField {
    pub domain: Domain,
    pub nx: usize,
    pub ny: usize,
    pub t1: f64,
    pub t2: f64,
    pub det: Vec<f64>,
    pub labels: Vec<MixingClass>,
}

impl HypergraphField {
    pub fn cell_center(&self, ix: usize, iy: usize) -> Vec2 {
        Vec2::new(
            self.domain.x_min + (ix as f64 + 0.5) * self.domain.width() / self.nx as f64,
            self.domain.y_min + (iy as f64 + 0.5) * self.domain.height() / self.ny as f64,
        )
    }

    pub fn hyperbolic_fraction(&self) -> f64 {
        let n = self.labels.len();
        if n == 0 {
            return 0.0;
        }
        self.labels
            .iter()
            .filter(|&&l| l == MixingClass::Mesohyperbolic)
            .count() as f64
            / n as f64
    }

    /// CSV export: `x_km,y_km,det_value,label`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io::atomic_write(path, |w| {
            writeln!(w, "x_km,y_km,det_value,label")?;
            for iy in 0..self.ny {
                for ix in 0..self.nx {
                    let c = self.cell_center(ix, iy);
                    let i = iy * self.nx + ix;
                    writeln!(
                        w,
                        "{:.3},{:.3},{},{}",
                        c.x,
                        c.y,
                        self.det[i],
                        self.labels[i].label()
                    )?;
                }
            }
            Ok(())
        })
    }

    /// SVG raster, elliptic in blue and hyperbolic in red.
    pub fn write_svg(&self, path: &Path) -> Result<()> {
        let cell_w = 900.0 / self.nx as f64;
        let cell_h = cell_w * (self.domain.height() / self.domain.width())
            * (self.nx as f64 / self.ny as f64);
        let height = cell_h * self.ny as f64;
        crate::io::atomic_write(path, |w| {
            writeln!(
                w,
                r#"<svg xmlns="http://www.w3.org/2000/svg" width="900" height="{height:.0}" viewBox="0 0 900 {height:.0}">"#
            )?;
            for iy in 0..self.ny {
                for ix in 0..self.nx {
                    let color = match self.labels[iy * self.nx + ix] {
                        MixingClass::Mesoelliptic => "#2166ac",
                        MixingClass::Mesohyperbolic => "#b2182b",
                    };
                    // SVG y axis points down; flip rows
                    let x = ix as f64 * cell_w;
                    let y = (self.ny - 1 - iy) as f64 * cell_h;
                    writeln!(
                        w,
                        r#"<rect x="{x:.2}" y="{y:.2}" width="{cell_w:.2}" height="{cell_h:.2}" fill="{color}"/>"#
                    )?;
                }
            }
            writeln!(w, "</svg>")?;
            Ok(())
        })
    }
}

/// Classifies every grid cell over the interval `[t1, t2]`.
///
/// At each cell center the finite-time average velocity
/// `v̄(x) = (T(x) − x)/Δt` is differentiated by central differences with
/// stencil `h_km` (stencil points falling outside the domain are pulled to
/// the boundary, degrading to one-sided differences there). Determinants on
/// a class boundary count as mesoelliptic.
#[allow(clippy::too_many_arguments)]
pub fn classify(
    field: &dyn VelocityField,
    domain: Domain,
    nx: usize,
    ny: usize,
    t1: f64,
    t2: f64,
    h_km: f64,
    opts: IntegrationOptions,
) -> Result<HypergraphField> {
    if t2 <= t1 {
        return Err(Error::config("hypergraph interval must have t2 > t1"));
    }
    if h_km <= 0.0 {
        return Err(Error::config("stencil width must be positive"));
    }
    let dt = t2 - t1;
    let avg_velocity = |x: Vec2| -> Result<Vec2> {
        let end = integrate(field, x, t1, t2, opts)?;
        Ok((end - x) / dt)
    };

    let dx = domain.width() / nx as f64;
    let dy = domain.height() / ny as f64;
    let threshold = 4.0 / (dt * dt);
    let mut det = vec![0.0; nx * ny];
    let mut labels = vec![MixingClass::Mesoelliptic; nx * ny];

    use rayon::prelude::*;
    let results: Vec<Result<f64>> = (0..nx * ny)
        .into_par_iter()
        .map(|i| {
            let ix = i % nx;
            let iy = i / nx;
            let c = Vec2::new(
                domain.x_min + (ix as f64 + 0.5) * dx,
                domain.y_min + (iy as f64 + 0.5) * dy,
            );
            // clamp stencil points into the domain; divisor is the realized span
            let xp = Vec2::new((c.x + h_km).min(domain.x_max), c.y);
            let xm = Vec2::new((c.x - h_km).max(domain.x_min), c.y);
            let yp = Vec2::new(c.x, (c.y + h_km).min(domain.y_max));
            let ym = Vec2::new(c.x, (c.y - h_km).max(domain.y_min));
            let vxp = avg_velocity(xp)?;
            let vxm = avg_velocity(xm)?;
            let vyp = avg_velocity(yp)?;
            let vym = avg_velocity(ym)?;
            let inv_x = 1.0 / (xp.x - xm.x);
            let inv_y = 1.0 / (yp.y - ym.y);
            let dudx = (vxp.x - vxm.x) * inv_x;
            let dudy = (vyp.x - vym.x) * inv_y;
            let dvdx = (vxp.y - vxm.y) * inv_x;
            let dvdy = (vyp.y - vym.y) * inv_y;
            Ok(dudx * dvdy - dudy * dvdx)
        })
        .collect();

    for (i, r) in results.into_iter().enumerate() {
        let d = r?;
        det[i] = d;
        labels[i] = if d < 0.0 || d > threshold {
            MixingClass::Mesohyperbolic
        } else {
            MixingClass::Mesoelliptic
        };
    }

    Ok(HypergraphField {
        domain,
        nx,
        ny,
        t1,
        t2,
        det,
        labels,
    })
}
