//! Search-coverage accounting: Dirac deposits along agent paths, drifted with
//! the flow, and their RBF-smoothed grid field.

use crate::control::AgentState;
use crate::domain::{Domain, ScalarField};
use crate::flow::{integrate, IntegrationOptions, VelocityField};
use crate::geom::Vec2;
use crate::transport::splat_truncated_gaussian;
use crate::{Error, Result};

/// One coverage deposit: where search effort was spent, in agent-hours.
#[derive(Clone, Copy, Debug)]
pub struct CoverageParticle {
    pub position: Vec2,
    pub weight: f64,
}

/// All coverage spent so far: drifting deposit particles plus bookkeeping of
/// searched time per agent. The grid integral of [`CoverageState::smooth`]
/// equals the summed agent-hours exactly.
#[derive(Clone, Debug)]
pub struct CoverageState {
    particles: Vec<CoverageParticle>,
    searched_hours_by_agent: Vec<f64>,
    pub sigma_km: f64,
}

impl CoverageState {
    pub fn new(sigma_km: f64) -> Result<Self> {
        if sigma_km <= 0.0 {
            return Err(Error::config("coverage smoothing scale must be positive"));
        }
        Ok(CoverageState {
            particles: Vec::new(),
            searched_hours_by_agent: Vec::new(),
            sigma_km,
        })
    }

    pub fn particles(&self) -> &[CoverageParticle] {
        &self.particles
    }

    pub fn total_searched_hours(&self) -> f64 {
        self.searched_hours_by_agent.iter().sum()
    }

    pub fn searched_hours_by_agent(&self) -> &[f64] {
        &self.searched_hours_by_agent
    }

    pub fn total_particle_weight(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }

    /// Deposits one particle of weight `dt` per active agent at its current
    /// position.
    pub fn deposit(&mut self, agents: &[AgentState], dt_hours: f64) -> Result<()> {
        if dt_hours <= 0.0 {
            return Err(Error::config("deposit interval must be positive"));
        }
        for (i, agent) in agents.iter().enumerate() {
            if !agent.active {
                continue;
            }
            self.particles.push(CoverageParticle {
                position: agent.position,
                weight: dt_hours,
            });
            if self.searched_hours_by_agent.len() <= i {
                self.searched_hours_by_agent.resize(i + 1, 0.0);
            }
            self.searched_hours_by_agent[i] += dt_hours;
        }
        Ok(())
    }

    /// Drifts all particles with the flow from `t1` to `t2`; weights unchanged.
    pub fn drift(
        &mut self,
        field: &dyn VelocityField,
        t1: f64,
        t2: f64,
        opts: IntegrationOptions,
    ) -> Result<()> {
        if t2 < t1 {
            return Err(Error::config("coverage drift interval reversed"));
        }
        if t2 == t1 {
            return Ok(());
        }
        for p in &mut self.particles {
            p.position = integrate(field, p.position, t1, t2, opts)?;
        }
        Ok(())
    }

    /// Smoothed coverage field: every particle splatted with a
    /// truncated-Gaussian RBF of scale sigma; per-particle mass lost to
    /// truncation or off-grid spill is rescaled back so the grid integral
    /// equals the particle's weight exactly.
    pub fn smooth(&self, domain: Domain, nx: usize, ny: usize) -> Result<ScalarField> {
        let mut field = ScalarField::zeros(domain, nx, ny)?;
        let mut kernel = ScalarField::zeros(domain, nx, ny)?;
        let cell_area = field.cell_area();
        for p in &self.particles {
            kernel.values_mut().fill(0.0);
            splat_truncated_gaussian(&mut kernel, p.position, self.sigma_km, 1.0);
            let mass: f64 = kernel.values().iter().sum::<f64>() * cell_area;
            if mass <= 0.0 {
                // particle drifted beyond kernel reach of the grid; its mass
                // cannot be represented on S
                continue;
            }
            let scale = p.weight / mass;
            for (dst, src) in field.values_mut().iter_mut().zip(kernel.values()) {
                *dst += scale * src;
            }
        }
        Ok(field)
    }

    /// Merges particles closer than `dist_km` (run between search days to
    /// bound particle growth). Total weight is preserved exactly; merged
    /// positions are weight-averaged.
    pub fn merge_colocated(&mut self, dist_km: f64) {
        if self.particles.len() < 2 || dist_km <= 0.0 {
            return;
        }
        let inv = 1.0 / dist_km;
        let mut buckets: std::collections::HashMap<(i64, i64), usize> =
            std::collections::HashMap::new();
        let mut merged: Vec<CoverageParticle> = Vec::with_capacity(self.particles.len() / 2);
        for p in &self.particles {
            let key = ((p.position.x * inv).floor() as i64, (p.position.y * inv).floor() as i64);
            match buckets.get(&key) {
                Some(&idx) => {
                    let m = &mut merged[idx];
                    let w = m.weight + p.weight;
                    m.position = (m.position * m.weight + p.position * p.weight) / w;
                    m.weight = w;
                }
                None => {
                    buckets.insert(key, merged.len());
                    merged.push(*p);
                }
            }
        }
        self.particles = merged;
    }
}
