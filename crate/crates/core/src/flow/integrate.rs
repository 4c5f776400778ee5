//! Flow-map integration: embedded Dormand–Prince 5(4) with adaptive step
//! control, a fixed-step RK4 mode for order verification, and finite-difference
//! flow-map gradients.

use crate::flow::VelocityField;
use crate::geom::Vec2;
use crate::{Error, Result};

/// Controls for the adaptive integrator.
#[derive(Clone, Copy, Debug)]
pub struct IntegrationOptions {
    /// Local error bound per step, in km.
    pub tol_km: f64,
    /// Abort after this many accepted+rejected steps.
    pub max_steps: usize,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        IntegrationOptions {
            tol_km: 1e-6,
            max_steps: 1_000_000,
        }
    }
}

impl IntegrationOptions {
    pub fn with_tol(tol_km: f64) -> Self {
        IntegrationOptions {
            tol_km,
            ..Default::default()
        }
    }
}

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
// 5th-order solution weights equal the last A row; E is (b5 - b4).
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `dx/dt = v(x, t)` from `t1` to `t2` with adaptive
/// Dormand–Prince 5(4) stepping, local error per step bounded by
/// `opts.tol_km`.
pub fn integrate<F: VelocityField + ?Sized>(
    field: &F,
    x0: Vec2,
    t1: f64,
    t2: f64,
    opts: IntegrationOptions,
) -> Result<Vec2> {
    if t2 < t1 {
        return Err(Error::config(format!(
            "integration interval reversed: [{t1}, {t2}]"
        )));
    }
    let span = t2 - t1;
    if span == 0.0 {
        return Ok(x0);
    }
    let tol = opts.tol_km.max(1e-14);
    let mut x = x0;
    let mut t = t1;
    let mut k0 = field.velocity(x, t);
    // Try the whole interval first; the controller shrinks on rejection.
    let mut h = span;
    let mut steps = 0usize;
    let mut k = [Vec2::ZERO; 7];

    while t < t2 {
        if steps >= opts.max_steps {
            return Err(Error::Integration {
                t_hours: t,
                x: x.x,
                y: x.y,
                reason: format!("step limit {} exceeded (tol {tol} km)", opts.max_steps),
            });
        }
        steps += 1;
        h = h.min(t2 - t);

        k[0] = k0;
        for s in 0..6 {
            let mut xs = x;
            for (j, a) in A[s].iter().enumerate().take(s + 1) {
                xs += k[j] * (*a * h);
            }
            k[s + 1] = field.velocity(xs, t + C[s] * h);
        }
        // k[6] is the FSAL stage: the 5th-order solution's derivative.
        let x5 = {
            let mut xs = x;
            for (j, a) in A[5].iter().enumerate() {
                xs += k[j] * (*a * h);
            }
            xs
        };
        let mut err_vec = Vec2::ZERO;
        for (j, e) in E.iter().enumerate() {
            err_vec += k[j] * (*e * h);
        }
        // non-finite trial states reject the step and shrink
        let err = if err_vec.is_finite() && x5.is_finite() {
            err_vec.norm()
        } else {
            f64::INFINITY
        };

        if err <= tol {
            t += h;
            x = x5;
            k0 = k[6];
        }
        // standard controller with safety factor and clamped growth
        let factor = if err > 0.0 {
            0.9 * (tol / err).powf(0.2)
        } else {
            5.0
        };
        h *= factor.clamp(0.2, 5.0);
        if h <= 0.0 || !h.is_finite() {
            return Err(Error::Integration {
                t_hours: t,
                x: x.x,
                y: x.y,
                reason: "step size underflow".into(),
            });
        }
    }
    Ok(x)
}

/// Classical fixed-step RK4 with step `h` (hours); the last step is shortened
/// to land exactly on `t2`.
pub fn integrate_fixed_rk4<F: VelocityField + ?Sized>(
    field: &F,
    x0: Vec2,
    t1: f64,
    t2: f64,
    h: f64,
) -> Vec2 {
    let mut x = x0;
    let mut t = t1;
    while t < t2 {
        let step = h.min(t2 - t);
        let k1 = field.velocity(x, t);
        let k2 = field.velocity(x + k1 * (step / 2.0), t + step / 2.0);
        let k3 = field.velocity(x + k2 * (step / 2.0), t + step / 2.0);
        let k4 = field.velocity(x + k3 * step, t + step);
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (step / 6.0);
        t += step;
    }
    x
}

/// Spatial gradient of the flow map over `[t1, t2]` by central finite
/// differences on a 4-point stencil of width `h` km. Row-major 2x2:
/// `[[dTx/dx, dTx/dy], [dTy/dx, dTy/dy]]`.
pub fn flow_map_gradient<F: VelocityField + ?Sized>(
    field: &F,
    x0: Vec2,
    t1: f64,
    t2: f64,
    h: f64,
    opts: IntegrationOptions,
) -> Result<[[f64; 2]; 2]> {
    let xp = integrate(field, Vec2::new(x0.x + h, x0.y), t1, t2, opts)?;
    let xm = integrate(field, Vec2::new(x0.x - h, x0.y), t1, t2, opts)?;
    let yp = integrate(field, Vec2::new(x0.x, x0.y + h), t1, t2, opts)?;
    let ym = integrate(field, Vec2::new(x0.x, x0.y - h), t1, t2, opts)?;
    let inv = 1.0 / (2.0 * h);
    Ok([
        [(xp.x - xm.x) * inv, (yp.x - ym.x) * inv],
        [(xp.y - xm.y) * inv, (yp.y - ym.y) * inv],
    ])
}

pub fn det2(m: [[f64; 2]; 2]) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use crate::flow::AnalyticFlow;
    use approx::assert_relative_eq;

    #[test]
    fn zero_field_is_identity() {
        let f = AnalyticFlow::Uniform { u: 0.0, v: 0.0 };
        let x0 = Vec2::new(3.0, -2.0);
        let x = integrate(&f, x0, 0.0, 17.0, IntegrationOptions::default()).unwrap();
        assert_eq!(x, x0);
    }

    #[test]
    fn uniform_field_translates() {
        let f = AnalyticFlow::Uniform { u: 2.0, v: -1.5 };
        let x = integrate(&f, Vec2::new(1.0, 1.0), 2.0, 6.0, IntegrationOptions::default())
            .unwrap();
        assert_relative_eq!(x.x, 9.0, epsilon = 1e-9);
        assert_relative_eq!(x.y, -5.0, epsilon = 1e-9);
    }

    #[test]
    fn rotation_closes_after_full_period() {
        let omega = 2.0 * std::f64::consts::PI / 24.0;
        let f = AnalyticFlow::Rotation {
            omega,
            center: Vec2::new(100.0, 100.0),
        };
        let x0 = Vec2::new(150.0, 100.0);
        let period = 2.0 * std::f64::consts::PI / omega;
        let x = integrate(&f, x0, 0.0, period, IntegrationOptions::with_tol(1e-9)).unwrap();
        assert!(
            x.dist(x0) < 1e-6,
            "orbit closure error {} km",
            x.dist(x0)
        );
    }

    #[test]
    fn fixed_rk4_order_at_least_3_9() {
        let omega = 2.0 * std::f64::consts::PI;
        let f = AnalyticFlow::Rotation {
            omega,
            center: Vec2::ZERO,
        };
        let x0 = Vec2::new(50.0, 0.0);
        let t_end = 1.0;
        // analytic: rotation by omega * t_end
        let ang = omega * t_end;
        let exact = Vec2::new(x0.x * ang.cos(), x0.x * ang.sin());
        let mut errors = Vec::new();
        let mut h = 0.25;
        while h >= 1.0 / 64.0 - 1e-12 {
            let x = integrate_fixed_rk4(&f, x0, 0.0, t_end, h);
            errors.push((h, x.dist(exact)));
            h /= 2.0;
        }
        // least-squares slope of log2(error) vs log2(h)
        let n = errors.len() as f64;
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for (h, e) in &errors {
            let lx = h.log2();
            let ly = e.log2();
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
        }
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!(slope >= 3.9, "observed RK4 order {slope}, errors {errors:?}");
    }

    #[test]
    fn flow_map_composition() {
        let d = Domain::new(0.0, 200.0, 0.0, 100.0).unwrap();
        let f = AnalyticFlow::DoubleGyre {
            domain: d,
            amplitude: 80.0,
            epsilon: 0.2,
            omega: 0.3,
        };
        let opts = IntegrationOptions::with_tol(1e-8);
        let x0 = Vec2::new(55.0, 40.0);
        let direct = integrate(&f, x0, 0.0, 30.0, opts).unwrap();
        let mid = integrate(&f, x0, 0.0, 13.0, opts).unwrap();
        let composed = integrate(&f, mid, 13.0, 30.0, opts).unwrap();
        assert!(
            direct.dist(composed) < 10.0 * 1e-6,
            "composition error {}",
            direct.dist(composed)
        );
    }

    #[test]
    fn gradient_identity_for_trivial_fields() {
        let opts = IntegrationOptions::default();
        for f in [
            AnalyticFlow::Uniform { u: 0.0, v: 0.0 },
            AnalyticFlow::Uniform { u: 3.0, v: 1.0 },
        ] {
            let g =
                flow_map_gradient(&f, Vec2::new(10.0, 10.0), 0.0, 5.0, 0.5, opts).unwrap();
            assert_relative_eq!(g[0][0], 1.0, epsilon = 1e-9);
            assert_relative_eq!(g[1][1], 1.0, epsilon = 1e-9);
            assert_relative_eq!(g[0][1], 0.0, epsilon = 1e-9);
            assert_relative_eq!(g[1][0], 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn saddle_gradient_matches_exponentials() {
        let rate = 0.3;
        let f = AnalyticFlow::Saddle {
            rate,
            center: Vec2::ZERO,
        };
        let dt = 2.0;
        let g = flow_map_gradient(
            &f,
            Vec2::new(1.0, 1.0),
            0.0,
            dt,
            0.5,
            IntegrationOptions::with_tol(1e-10),
        )
        .unwrap();
        assert_relative_eq!(g[0][0], (rate * dt).exp(), max_relative = 1e-4);
        assert_relative_eq!(g[1][1], (-rate * dt).exp(), max_relative = 1e-4);
        assert!(g[0][1].abs() < 1e-6 && g[1][0].abs() < 1e-6);
    }

    #[test]
    fn divergence_free_flow_preserves_area() {
        let d = Domain::new(0.0, 200.0, 0.0, 100.0).unwrap();
        let gyre = AnalyticFlow::DoubleGyre {
            domain: d,
            amplitude: 80.0,
            epsilon: 0.25,
            omega: 0.3,
        };
        let opts = IntegrationOptions::with_tol(1e-9);
        for x0 in [Vec2::new(60.0, 30.0), Vec2::new(140.0, 70.0)] {
            let g = flow_map_gradient(&gyre, x0, 0.0, 12.0, 0.25, opts).unwrap();
            let det = det2(g);
            assert!(
                (det - 1.0).abs() < 0.01,
                "det(∇T) = {det} should be 1 within 1%"
            );
        }
    }

    #[test]
    fn step_limit_reports_failure() {
        let f = AnalyticFlow::Rotation {
            omega: 1.0,
            center: Vec2::ZERO,
        };
        let opts = IntegrationOptions {
            tol_km: 1e-12,
            max_steps: 5,
        };
        let err = integrate(&f, Vec2::new(100.0, 0.0), 0.0, 100.0, opts).unwrap_err();
        assert!(matches!(err, Error::Integration { .. }), "{err}");
    }

    #[test]
    fn reversed_interval_rejected() {
        let f = AnalyticFlow::Uniform { u: 0.0, v: 0.0 };
        assert!(integrate(&f, Vec2::ZERO, 5.0, 1.0, IntegrationOptions::default()).is_err());
    }
}
