//! Separable cosine basis with Sobolev weighting.
//!
//! The basis functions are L2-orthonormal on the domain,
//! `f_k(x,y) = cos(kx·π·ξ)·cos(ky·π·η) / sqrt(hx·hy)` with `ξ, η` the
//! normalized coordinates and `hx, hy` the 1-D normalization factors
//! (`L` for mode 0, `L/2` otherwise). Their normal derivative vanishes on
//! the boundary, which keeps gradient-steered agents inside the domain.

use std::f64::consts::PI;

use crate::domain::{Domain, ScalarField};
use crate::geom::Vec2;
use crate::{Error, Result};

/// Sobolev weight `(1 + ‖k‖²)^beta` for squared wave-number magnitude `k_sq`.
pub fn sobolev_weight(k_sq: f64, beta: f64) -> f64 {
    (1.0 + k_sq).powf(beta)
}

/// Spectral coefficients produced by [`SpectralBasis::transform`].
#[derive(Clone, Debug)]
pub struct SpectralCoeffs {
    pub modes: usize,
    values: Vec<f64>,
}

impl SpectralCoeffs {
    /// Coefficient for mode `(kx, ky)`.
    pub fn get(&self, kx: usize, ky: usize) -> f64 {
        self.values[ky * self.modes + kx]
    }

    pub fn set(&mut self, kx: usize, ky: usize, v: f64) {
        self.values[ky * self.modes + kx] = v;
    }

    pub fn zeros(modes: usize) -> Self {
        SpectralCoeffs {
            modes,
            values: vec![0.0; modes * modes],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Potential evaluation at a point: value, gradient, and whether the query
/// point had to be clamped into the domain.
#[derive(Clone, Copy, Debug)]
pub struct PotentialSample {
    pub value: f64,
    pub gradient: Vec2,
    pub clamped: bool,
}

/// Cosine basis over a domain with `modes` modes per axis and Sobolev index
/// `beta` (negative: fine scales are discounted).
#[derive(Clone, Debug)]
pub struct SpectralBasis {
    pub domain: Domain,
    pub modes: usize,
    pub beta: f64,
    lambda: Vec<f64>,
    /// 1-D normalization 1/sqrt(h) per mode, x axis then y axis.
    norm_x: Vec<f64>,
    norm_y: Vec<f64>,
}

impl SpectralBasis {
    pub fn new(domain: Domain, modes: usize, beta: f64) -> Result<Self> {
        if modes == 0 {
            return Err(Error::config("spectral basis needs at least one mode"));
        }
        if beta >= 0.0 {
            return Err(Error::config(format!(
                "Sobolev index must be negative, got {beta}"
            )));
        }
        let (lx, ly) = (domain.width(), domain.height());
        let norm_1d = |l: f64, k: usize| {
            if k == 0 {
                1.0 / l.sqrt()
            } else {
                (2.0 / l).sqrt()
            }
        };
        let norm_x: Vec<f64> = (0..modes).map(|k| norm_1d(lx, k)).collect();
        let norm_y: Vec<f64> = (0..modes).map(|k| norm_1d(ly, k)).collect();
        let mut lambda = vec![0.0; modes * modes];
        for ky in 0..modes {
            for kx in 0..modes {
                let k_sq = (kx * kx + ky * ky) as f64;
                lambda[ky * modes + kx] = sobolev_weight(k_sq, beta);
            }
        }
        Ok(SpectralBasis {
            domain,
            modes,
            beta,
            lambda,
            norm_x,
            norm_y,
        })
    }

    pub fn lambda(&self, kx: usize, ky: usize) -> f64 {
        self.lambda[ky * self.modes + kx]
    }

    /// Basis function value at a point.
    pub fn basis_fn(&self, kx: usize, ky: usize, p: Vec2) -> f64 {
        let xi = (p.x - self.domain.x_min) / self.domain.width();
        let eta = (p.y - self.domain.y_min) / self.domain.height();
        self.norm_x[kx]
            * self.norm_y[ky]
            * (kx as f64 * PI * xi).cos()
            * (ky as f64 * PI * eta).cos()
    }

    /// Projects a field onto the basis with midpoint quadrature on the
    /// field's grid. Fails when field and basis domains differ.
    pub fn transform(&self, field: &ScalarField) -> Result<SpectralCoeffs> {
        if field.domain != self.domain {
            return Err(Error::DomainMismatch(
                "transform: field and basis domains differ".into(),
            ));
        }
        let k = self.modes;
        let (nx, ny) = (field.nx, field.ny);
        // Separable contraction: over x first, then y.
        let cos_x = self.cos_table(nx, self.domain.width(), &self.norm_x);
        let cos_y = self.cos_table(ny, self.domain.height(), &self.norm_y);

        let mut partial = vec![0.0; k * ny]; // [kx][iy]
        let values = field.values();
        for iy in 0..ny {
            let row = &values[iy * nx..(iy + 1) * nx];
            for kx in 0..k {
                let tab = &cos_x[kx * nx..(kx + 1) * nx];
                let mut acc = 0.0;
                for ix in 0..nx {
                    acc += tab[ix] * row[ix];
                }
                partial[kx * ny + iy] = acc;
            }
        }
        let cell_area = field.cell_area();
        let mut coeffs = SpectralCoeffs::zeros(k);
        for ky in 0..k {
            let taby = &cos_y[ky * ny..(ky + 1) * ny];
            for kx in 0..k {
                let part = &partial[kx * ny..(kx + 1) * ny];
                let mut acc = 0.0;
                for iy in 0..ny {
                    acc += taby[iy] * part[iy];
                }
                coeffs.set(kx, ky, acc * cell_area);
            }
        }
        Ok(coeffs)
    }

    fn cos_table(&self, n: usize, len: f64, norm: &[f64]) -> Vec<f64> {
        let dx = len / n as f64;
        let mut table = vec![0.0; self.modes * n];
        for k in 0..self.modes {
            for i in 0..n {
                let xi = ((i as f64 + 0.5) * dx) / len;
                table[k * n + i] = norm[k] * (k as f64 * PI * xi).cos();
            }
        }
        table
    }

    /// Sobolev norm `Σ_k λ_k s_k²` of a coefficient set.
    pub fn sobolev_norm(&self, coeffs: &SpectralCoeffs) -> f64 {
        debug_assert_eq!(coeffs.modes, self.modes);
        coeffs
            .values
            .iter()
            .zip(&self.lambda)
            .map(|(s, l)| l * s * s)
            .sum()
    }

    /// Evaluates the potential `u = Σ_k λ_k s_k f_k` and its analytic
    /// gradient at a point. Points outside the domain are clamped to the
    /// boundary and flagged.
    pub fn synthesize_potential(&self, coeffs: &SpectralCoeffs, point: Vec2) -> PotentialSample {
        debug_assert_eq!(coeffs.modes, self.modes);
        let clamped = !self.domain.contains(point);
        let p = self.domain.clamp(point);
        let (lx, ly) = (self.domain.width(), self.domain.height());
        let xi = (p.x - self.domain.x_min) / lx;
        let eta = (p.y - self.domain.y_min) / ly;

        let k = self.modes;
        let mut cx = vec![0.0; k];
        let mut sx = vec![0.0; k];
        let mut cy = vec![0.0; k];
        let mut sy = vec![0.0; k];
        for m in 0..k {
            let (s, c) = (m as f64 * PI * xi).sin_cos();
            cx[m] = self.norm_x[m] * c;
            sx[m] = self.norm_x[m] * s * (m as f64 * PI / lx);
            let (s, c) = (m as f64 * PI * eta).sin_cos();
            cy[m] = self.norm_y[m] * c;
            sy[m] = self.norm_y[m] * s * (m as f64 * PI / ly);
        }

        let mut u = 0.0;
        let mut gx = 0.0;
        let mut gy = 0.0;
        for ky in 0..k {
            for kx in 0..k {
                let w = self.lambda[ky * k + kx] * coeffs.get(kx, ky);
                if w == 0.0 {
                    continue;
                }
                u += w * cx[kx] * cy[ky];
                gx -= w * sx[kx] * cy[ky];
                gy -= w * cx[kx] * sy[ky];
            }
        }
        PotentialSample {
            value: u,
            gradient: Vec2::new(gx, gy),
            clamped,
        }
    }

    /// Field evaluation of a coefficient set on a grid (used by tests and
    /// diagnostics; the inverse of [`transform`] for in-band fields).
    pub fn synthesize_field(
        &self,
        coeffs: &SpectralCoeffs,
        nx: usize,
        ny: usize,
    ) -> Result<ScalarField> {
        let mut field = ScalarField::zeros(self.domain, nx, ny)?;
        for iy in 0..ny {
            for ix in 0..nx {
                let p = field.cell_center(ix, iy);
                let mut acc = 0.0;
                for ky in 0..self.modes {
                    for kx in 0..self.modes {
                        let s = coeffs.get(kx, ky);
                        if s != 0.0 {
                            acc += s * self.basis_fn(kx, ky, p);
                        }
                    }
                }
                field.set(ix, iy, acc);
            }
        }
        Ok(field)
    }
}
