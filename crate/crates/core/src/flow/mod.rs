//! Velocity fields and numerical flow maps.

mod gridded;
mod integrate;

pub use gridded::{read_ovf1, write_ovf1, GriddedVelocity};
pub use integrate::{
    det2, flow_map_gradient, integrate, integrate_fixed_rk4, IntegrationOptions,
};

use crate::domain::Domain;
use crate::geom::Vec2;

/// An unsteady planar velocity field, positions in km, time in hours,
/// velocities in km/h. Evaluation must be deterministic for fixed arguments.
pub trait VelocityField: Send + Sync {
    fn velocity(&self, p: Vec2, t_hours: f64) -> Vec2;

    /// Time interval over which the field is defined; `None` for all time.
    fn time_range(&self) -> Option<(f64, f64)> {
        None
    }
}

/// Closed-form velocity fields used as desk-scale stand-ins for ocean data.
#[derive(Clone, Debug)]
pub enum AnalyticFlow {
    /// Constant translation (km/h).
    Uniform { u: f64, v: f64 },
    /// Rigid rotation about a center, `omega` in rad/h.
    Rotation { omega: f64, center: Vec2 },
    /// Linear saddle `v = rate·(x - cx, -(y - cy))`, `rate` in 1/h.
    Saddle { rate: f64, center: Vec2 },
    /// Periodically perturbed double gyre filling `domain`. The stream
    /// function is `amplitude·sin(π f(ξ,t))·sin(π η)` on normalized
    /// coordinates ξ ∈ [0,2], η ∈ [0,1]; peak |u| is roughly
    /// `π·amplitude/Ly`. `omega` in rad/h.
    DoubleGyre {
        domain: Domain,
        amplitude: f64,
        epsilon: f64,
        omega: f64,
    },
}

impl VelocityField for AnalyticFlow {
    fn velocity(&self, p: Vec2, t: f64) -> Vec2 {
        match *self {
            AnalyticFlow::Uniform { u, v } => Vec2::new(u, v),
            AnalyticFlow::Rotation { omega, center } => {
                let r = p - center;
                Vec2::new(-omega * r.y, omega * r.x)
            }
            AnalyticFlow::Saddle { rate, center } => {
                let r = p - center;
                Vec2::new(rate * r.x, -rate * r.y)
            }
            AnalyticFlow::DoubleGyre {
                domain,
                amplitude,
                epsilon,
                omega,
            } => {
                use std::f64::consts::PI;
                let lx = domain.width();
                let ly = domain.height();
                let xi = 2.0 * (p.x - domain.x_min) / lx;
                let eta = (p.y - domain.y_min) / ly;
                let e = epsilon * (omega * t).sin();
                let f = e * xi * xi + (1.0 - 2.0 * e) * xi;
                let dfdxi = 2.0 * e * xi + (1.0 - 2.0 * e);
                let u = -(amplitude * PI / ly) * (PI * f).sin() * (PI * eta).cos();
                let v = (2.0 * amplitude * PI / lx) * (PI * f).cos() * dfdxi * (PI * eta).sin();
                Vec2::new(u, v)
            }
        }
    }
}
