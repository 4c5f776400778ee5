//! Gridded velocity data: bilinear-in-space, linear-in-time interpolation,
//! plus the OVF1 on-disk format.
//!
//! OVF1 layout (little-endian): magic `OVF1`; i32 nx, ny, nt; f64 lon0,
//! lat0, dlon, dlat, ref_lat, t0_hours, dt_hours; then nt frames, each
//! ny·nx f32 u values (row-major, south-to-north) followed by ny·nx f32 v
//! values. Units on disk are m/s; in memory km/h.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::flow::VelocityField;
use crate::geom::Vec2;
use crate::{Error, Result};

/// Kilometres per degree of latitude.
const KM_PER_DEG_LAT: f64 = 110.574;
/// Kilometres per degree of longitude at the equator.
const KM_PER_DEG_LON_EQ: f64 = 111.320;
const MS_TO_KMH: f64 = 3.6;

/// Velocity samples on a regular space-time grid, in local tangent-plane km.
///
/// Queries outside the time axis clamp to the nearest frame; queries outside
/// the spatial extent return zero velocity (freezing any tracer there) and
/// bump [`GriddedVelocity::out_of_bounds_count`].
#[derive(Debug)]
pub struct GriddedVelocity {
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    pub origin: Vec2,
    pub dx_km: f64,
    pub dy_km: f64,
    pub t0_hours: f64,
    pub dt_hours: f64,
    /// frame-major, then row-major south-to-north: `u[(it*ny + iy)*nx + ix]`, km/h.
    u: Vec<f32>,
    v: Vec<f32>,
    out_of_bounds: AtomicU64,
}

impl GriddedVelocity {
    /// Builds a grid directly in km coordinates (mainly for tests and
    /// synthetic data).
    #[allow(clippy::too_many_arguments)]
    pub fn from_km(
        nx: usize,
        ny: usize,
        nt: usize,
        origin: Vec2,
        dx_km: f64,
        dy_km: f64,
        t0_hours: f64,
        dt_hours: f64,
        u_kmh: Vec<f32>,
        v_kmh: Vec<f32>,
    ) -> Result<Self> {
        let n = nx * ny * nt;
        if u_kmh.len() != n || v_kmh.len() != n {
            return Err(Error::config(format!(
                "velocity arrays must have nx*ny*nt = {n} entries"
            )));
        }
        if nx < 2 || ny < 2 || nt < 1 || dx_km <= 0.0 || dy_km <= 0.0 || dt_hours <= 0.0 {
            return Err(Error::config("invalid gridded velocity geometry"));
        }
        Ok(GriddedVelocity {
            nx,
            ny,
            nt,
            origin,
            dx_km,
            dy_km,
            t0_hours,
            dt_hours,
            u: u_kmh,
            v: v_kmh,
            out_of_bounds: AtomicU64::new(0),
        })
    }

    /// Number of spatial out-of-range queries answered with zero velocity.
    pub fn out_of_bounds_count(&self) -> u64 {
        self.out_of_bounds.load(Ordering::Relaxed)
    }

    fn sample_frame(&self, it: usize, fx: f64, fy: f64, ix: usize, iy: usize) -> Vec2 {
        let base = it * self.ny * self.nx;
        let idx = |i: usize, j: usize| base + j * self.nx + i;
        let w00 = (1.0 - fx) * (1.0 - fy);
        let w10 = fx * (1.0 - fy);
        let w01 = (1.0 - fx) * fy;
        let w11 = fx * fy;
        let u = w00 * self.u[idx(ix, iy)] as f64
            + w10 * self.u[idx(ix + 1, iy)] as f64
            + w01 * self.u[idx(ix, iy + 1)] as f64
            + w11 * self.u[idx(ix + 1, iy + 1)] as f64;
        let v = w00 * self.v[idx(ix, iy)] as f64
            + w10 * self.v[idx(ix + 1, iy)] as f64
            + w01 * self.v[idx(ix, iy + 1)] as f64
            + w11 * self.v[idx(ix + 1, iy + 1)] as f64;
        Vec2::new(u, v)
    }
}

impl VelocityField for GriddedVelocity {
    fn velocity(&self, p: Vec2, t_hours: f64) -> Vec2 {
        let gx = (p.x - self.origin.x) / self.dx_km;
        let gy = (p.y - self.origin.y) / self.dy_km;
        if gx < 0.0 || gy < 0.0 || gx > (self.nx - 1) as f64 || gy > (self.ny - 1) as f64 {
            self.out_of_bounds.fetch_add(1, Ordering::Relaxed);
            return Vec2::ZERO;
        }
        let ix = (gx as usize).min(self.nx - 2);
        let iy = (gy as usize).min(self.ny - 2);
        let fx = gx - ix as f64;
        let fy = gy - iy as f64;

        // linear in time, clamped to the axis
        let gt = (t_hours - self.t0_hours) / self.dt_hours;
        if self.nt == 1 || gt <= 0.0 {
            return self.sample_frame(0, fx, fy, ix, iy);
        }
        if gt >= (self.nt - 1) as f64 {
            return self.sample_frame(self.nt - 1, fx, fy, ix, iy);
        }
        let it = (gt as usize).min(self.nt - 2);
        let ft = gt - it as f64;
        let a = self.sample_frame(it, fx, fy, ix, iy);
        let b = self.sample_frame(it + 1, fx, fy, ix, iy);
        a * (1.0 - ft) + b * ft
    }

    fn time_range(&self) -> Option<(f64, f64)> {
        Some((
            self.t0_hours,
            self.t0_hours + (self.nt.saturating_sub(1)) as f64 * self.dt_hours,
        ))
    }
}

fn read_exact_f64(r: &mut impl Read) -> std::io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_exact_i32(r: &mut impl Read) -> std::io::Result<i32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(i32::from_le_bytes(b))
}

/// Loads an OVF1 file, converting degrees to local-tangent km at the file's
/// reference latitude and m/s to km/h.
pub fn read_ovf1(path: &Path) -> Result<GriddedVelocity> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != b"OVF1" {
        return Err(Error::format(format!(
            "{}: bad magic {:?}, expected OVF1",
            path.display(),
            magic
        )));
    }
    let nx = read_exact_i32(&mut r)?;
    let ny = read_exact_i32(&mut r)?;
    let nt = read_exact_i32(&mut r)?;
    if nx < 2 || ny < 2 || nt < 1 {
        return Err(Error::format(format!(
            "{}: invalid grid shape {nx}x{ny}x{nt}",
            path.display()
        )));
    }
    let (nx, ny, nt) = (nx as usize, ny as usize, nt as usize);
    let _lon0 = read_exact_f64(&mut r)?;
    let _lat0 = read_exact_f64(&mut r)?;
    let dlon = read_exact_f64(&mut r)?;
    let dlat = read_exact_f64(&mut r)?;
    let ref_lat = read_exact_f64(&mut r)?;
    let t0_hours = read_exact_f64(&mut r)?;
    let dt_hours = read_exact_f64(&mut r)?;

    let km_per_deg_lon = KM_PER_DEG_LON_EQ * ref_lat.to_radians().cos();
    let dx_km = dlon * km_per_deg_lon;
    let dy_km = dlat * KM_PER_DEG_LAT;
    if dx_km <= 0.0 || dy_km <= 0.0 || dt_hours <= 0.0 {
        return Err(Error::format(format!(
            "{}: non-positive grid spacing",
            path.display()
        )));
    }

    let frame = ny * nx;
    let mut u = vec![0f32; frame * nt];
    let mut v = vec![0f32; frame * nt];
    let mut buf = vec![0u8; frame * 4];
    for it in 0..nt {
        for (dst, tag) in [(&mut u, "u"), (&mut v, "v")] {
            r.read_exact(&mut buf).map_err(|e| {
                Error::format(format!(
                    "{}: truncated {tag} frame {it}: {e}",
                    path.display()
                ))
            })?;
            for (i, chunk) in buf.chunks_exact(4).enumerate() {
                dst[it * frame + i] =
                    f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]])
                        * MS_TO_KMH as f32;
            }
        }
    }

    GriddedVelocity::from_km(
        nx,
        ny,
        nt,
        Vec2::ZERO,
        dx_km,
        dy_km,
        t0_hours,
        dt_hours,
        u,
        v,
    )
}

/// Writes an OVF1 file from m/s component frames (row-major, south-to-north).
#[allow(clippy::too_many_arguments)]
pub fn write_ovf1(
    path: &Path,
    nx: usize,
    ny: usize,
    nt: usize,
    header: [f64; 7],
    u_ms: &[f32],
    v_ms: &[f32],
) -> Result<()> {
    let frame = nx * ny;
    if u_ms.len() != frame * nt || v_ms.len() != frame * nt {
        return Err(Error::config("component arrays must be nx*ny*nt"));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(b"OVF1")?;
    for n in [nx, ny, nt] {
        w.write_all(&(n as i32).to_le_bytes())?;
    }
    for h in header {
        w.write_all(&h.to_le_bytes())?;
    }
    for it in 0..nt {
        for src in [u_ms, v_ms] {
            for val in &src[it * frame..(it + 1) * frame] {
                w.write_all(&val.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
