//! Rectangular search domain and cell-centered scalar fields on it.

use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::geom::Vec2;
use crate::{Error, Result};

/// The rectangular domain `S` (km). All probability, coverage and mismatch
/// fields live on it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Domain {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        if !(x_max > x_min && y_max > y_min) {
            return Err(Error::config(format!(
                "domain extents must be positive: x [{x_min}, {x_max}], y [{y_min}, {y_max}]"
            )));
        }
        Ok(Domain {
            x_min,
            x_max,
            y_min,
            y_max,
        })
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn clamp(&self, p: Vec2) -> Vec2 {
        Vec2::new(
            p.x.clamp(self.x_min, self.x_max),
            p.y.clamp(self.y_min, self.y_max),
        )
    }
}

/// A scalar function sampled at cell centers of a regular grid over a [`Domain`].
///
/// Values are stored row-major in y: index `(ix, iy)` maps to `iy * nx + ix`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub domain: Domain,
    pub nx: usize,
    pub ny: usize,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(domain: Domain, nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::config(format!(
                "grid must be at least 2x2, got {nx}x{ny}"
            )));
        }
        Ok(ScalarField {
            domain,
            nx,
            ny,
            values: vec![0.0; nx * ny],
        })
    }

    pub fn constant(domain: Domain, nx: usize, ny: usize, value: f64) -> Result<Self> {
        let mut f = Self::zeros(domain, nx, ny)?;
        f.values.fill(value);
        Ok(f)
    }

    /// Builds a field by evaluating `f` at every cell center.
    pub fn from_fn(
        domain: Domain,
        nx: usize,
        ny: usize,
        f: impl Fn(Vec2) -> f64,
    ) -> Result<Self> {
        let mut field = Self::zeros(domain, nx, ny)?;
        for iy in 0..ny {
            for ix in 0..nx {
                let c = field.cell_center(ix, iy);
                field.values[iy * nx + ix] = f(c);
            }
        }
        Ok(field)
    }

    pub fn cell_dx(&self) -> f64 {
        self.domain.width() / self.nx as f64
    }

    pub fn cell_dy(&self) -> f64 {
        self.domain.height() / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_dx() * self.cell_dy()
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Vec2 {
        Vec2::new(
            self.domain.x_min + (ix as f64 + 0.5) * self.cell_dx(),
            self.domain.y_min + (iy as f64 + 0.5) * self.cell_dy(),
        )
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    pub fn set(&mut self, ix: usize, iy: usize, v: f64) {
        self.values[iy * self.nx + ix] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Midpoint-rule integral over the domain.
    pub fn integrate(&self) -> f64 {
        let a = self.cell_area();
        self.values.iter().sum::<f64>() * a
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    /// True when both fields share the domain and grid resolution.
    pub fn same_grid(&self, other: &ScalarField) -> bool {
        self.domain == other.domain && self.nx == other.nx && self.ny == other.ny
    }

    pub(crate) fn check_same_grid(&self, other: &ScalarField, what: &str) -> Result<()> {
        if !self.same_grid(other) {
            return Err(Error::DomainMismatch(format!(
                "{what}: {}x{} on {:?} vs {}x{} on {:?}",
                self.nx, self.ny, self.domain, other.nx, other.ny, other.domain
            )));
        }
        Ok(())
    }

    /// Writes the shared `x_km,y_km,value` CSV schema, one row per cell.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io::atomic_write(path, |w| {
            writeln!(w, "x_km,y_km,value")?;
            for iy in 0..self.ny {
                for ix in 0..self.nx {
                    let c = self.cell_center(ix, iy);
                    writeln!(w, "{:.3},{:.3},{}", c.x, c.y, self.get(ix, iy))?;
                }
            }
            Ok(())
        })
    }
}
