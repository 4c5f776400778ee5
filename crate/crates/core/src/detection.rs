//! Stochastic target detection: exponential-saturation draws for targets
//! within sensor range of a searching agent.

use rand::Rng;

use crate::geom::Vec2;
use crate::rng::{stream_rng, Stream};
use crate::{Error, Result};

/// Sensor model: detection radius and expected detection time for a target
/// dwelling in range.
#[derive(Clone, Copy, Debug)]
pub struct DetectionModel {
    pub radius_km: f64,
    pub mean_time_s: f64,
}

impl Default for DetectionModel {
    fn default() -> Self {
        DetectionModel {
            radius_km: 1.5,
            mean_time_s: 2.0,
        }
    }
}

impl DetectionModel {
    pub fn new(radius_km: f64, mean_time_s: f64) -> Result<Self> {
        if radius_km <= 0.0 || mean_time_s <= 0.0 {
            return Err(Error::config(
                "detection radius and expected time must be positive",
            ));
        }
        Ok(DetectionModel {
            radius_km,
            mean_time_s,
        })
    }

    /// Probability that a target exposed for `dwell_h` hours is detected:
    /// `1 − e^{−t/T}`.
    pub fn exposure_probability(&self, dwell_h: f64) -> f64 {
        1.0 - (-dwell_h * 3600.0 / self.mean_time_s).exp()
    }
}

/// Drifting targets with detection bookkeeping. Detected targets freeze at
/// their detection point and are never re-detected.
#[derive(Clone, Debug)]
pub struct TargetSet {
    pub positions: Vec<Vec2>,
    /// Detection timestamp (hours) per target, `None` while undetected.
    pub detected_at: Vec<Option<f64>>,
}

impl TargetSet {
    pub fn new(positions: Vec<Vec2>) -> Self {
        let n = positions.len();
        TargetSet {
            positions,
            detected_at: vec![None; n],
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn detected_count(&self) -> usize {
        self.detected_at.iter().filter(|d| d.is_some()).count()
    }

    pub fn detected_fraction(&self) -> f64 {
        if self.positions.is_empty() {
            0.0
        } else {
            self.detected_count() as f64 / self.positions.len() as f64
        }
    }
}

/// One agent's motion over a control step.
#[derive(Clone, Copy, Debug)]
pub struct AgentStep {
    pub from: Vec2,
    pub to: Vec2,
}

/// A detection event for the NDJSON log.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct DetectionEvent {
    pub t_hours: f64,
    pub target_id: usize,
    pub agent_id: usize,
    pub x_km: f64,
    pub y_km: f64,
}

/// In-range dwell time (hours) of a target against one agent step, sampled
/// along the agent segment at 1 km intervals so fast agents cannot tunnel
/// past targets.
fn dwell_hours(model: &DetectionModel, step: AgentStep, target: Vec2, dt_hours: f64) -> f64 {
    let seg = step.to - step.from;
    let len = seg.norm();
    // quick reject: beyond reach of the whole segment
    if crate::geom::point_segment_distance(target, step.from, step.to) > model.radius_km {
        return 0.0;
    }
    let samples = (len.ceil() as usize).max(1);
    let mut in_range = 0usize;
    for j in 0..samples {
        let s = (j as f64 + 0.5) / samples as f64;
        let p = step.from + seg * s;
        if p.dist(target) <= model.radius_km {
            in_range += 1;
        }
    }
    dt_hours * in_range as f64 / samples as f64
}

/// Runs one detection step: every undetected target in range of an active
/// agent draws a Bernoulli with `p = 1 − e^{−dwell/T}`. A target seen by
/// several agents is tested once, against its best single-agent exposure.
/// Draws come from a per-(target, step) stream so parallel and serial
/// schedules agree bit-for-bit.
#[allow(clippy::too_many_arguments)]
pub fn detect_step(
    model: &DetectionModel,
    agent_steps: &[AgentStep],
    targets: &mut TargetSet,
    seed: u64,
    run_index: u64,
    step_index: u64,
    t_hours: f64,
    dt_hours: f64,
) -> Result<Vec<DetectionEvent>> {
    if dt_hours <= 0.0 {
        return Err(Error::config("detection step must be positive"));
    }
    let mut events = Vec::new();
    for tid in 0..targets.positions.len() {
        if targets.detected_at[tid].is_some() {
            continue;
        }
        let pos = targets.positions[tid];
        let mut best = 0.0f64;
        let mut best_agent = 0usize;
        for (aid, step) in agent_steps.iter().enumerate() {
            let dwell = dwell_hours(model, *step, pos, dt_hours);
            if dwell > best {
                best = dwell;
                best_agent = aid;
            }
        }
        if best <= 0.0 {
            continue;
        }
        let p = model.exposure_probability(best);
        let mut rng = stream_rng(seed, Stream::Detection, &[run_index, tid as u64, step_index]);
        if rng.gen::<f64>() < p {
            targets.detected_at[tid] = Some(t_hours);
            events.push(DetectionEvent {
                t_hours,
                target_id: tid,
                agent_id: best_agent,
                x_km: pos.x,
                y_km: pos.y,
            });
        }
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn stationary(p: Vec2) -> AgentStep {
        AgentStep { from: p, to: p }
    }

    #[test]
    fn out_of_range_target_is_never_tested() {
        let model = DetectionModel::default();
        let mut targets = TargetSet::new(vec![Vec2::new(10.0, 0.0)]);
        for step in 0..1000 {
            let events = detect_step(
                &model,
                &[stationary(Vec2::ZERO)],
                &mut targets,
                1,
                0,
                step,
                0.0,
                1.0 / 60.0,
            )
            .unwrap();
            assert!(events.is_empty());
        }
        assert_eq!(targets.detected_count(), 0);
    }

    #[test]
    fn coincident_pair_probability_formula() {
        let model = DetectionModel::default();
        // dwell equal to the expected time T gives 1 - 1/e
        let dwell_h = model.mean_time_s / 3600.0;
        assert_relative_eq!(
            model.exposure_probability(dwell_h),
            1.0 - (-1.0f64).exp(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn memorylessness_substep_closure() {
        let model = DetectionModel::default();
        let dt = 10.0 / 3600.0; // 10 seconds
        let direct = model.exposure_probability(dt);
        for k in [2, 5, 8] {
            let sub = model.exposure_probability(dt / k as f64);
            let compound = 1.0 - (1.0 - sub).powi(k);
            assert_relative_eq!(compound, direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn monte_carlo_matches_exponential_cdf() {
        let model = DetectionModel::default();
        let n = 10_000usize;
        let agent = stationary(Vec2::ZERO);
        let mut targets = TargetSet::new(vec![Vec2::ZERO; n]);
        let dt_s = 0.5;
        let dt_h = dt_s / 3600.0;
        let mut step = 0u64;
        for checkpoint_s in [1.0, 2.0, 4.0] {
            while (step as f64) * dt_s < checkpoint_s {
                detect_step(&model, &[agent], &mut targets, 99, 0, step, 0.0, dt_h).unwrap();
                step += 1;
            }
            let expect = 1.0 - (-checkpoint_s / model.mean_time_s).exp();
            let got = targets.detected_fraction();
            let sigma = (expect * (1.0 - expect) / n as f64).sqrt();
            assert!(
                (got - expect).abs() < 3.0 * sigma,
                "t={checkpoint_s}s: empirical {got} vs {expect} (3σ={})",
                3.0 * sigma
            );
        }
    }

    #[test]
    fn detected_targets_stay_detected() {
        let model = DetectionModel::new(2.0, 1e-9).unwrap(); // certain detection
        let mut targets = TargetSet::new(vec![Vec2::ZERO]);
        let ev = detect_step(
            &model,
            &[stationary(Vec2::ZERO)],
            &mut targets,
            5,
            0,
            0,
            1.0,
            1.0 / 60.0,
        )
        .unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(targets.detected_at[0], Some(1.0));
        let ev = detect_step(
            &model,
            &[stationary(Vec2::ZERO)],
            &mut targets,
            5,
            0,
            1,
            2.0,
            1.0 / 60.0,
        )
        .unwrap();
        assert!(ev.is_empty());
        assert_eq!(targets.detected_at[0], Some(1.0));
    }

    #[test]
    fn multi_agent_exposure_counts_once() {
        let model = DetectionModel::default();
        let target = Vec2::ZERO;
        let dt = 1.0 / 60.0;
        let one = dwell_hours(&model, stationary(target), target, dt);
        // two coincident agents give the same single-exposure dwell
        let steps = [stationary(target), stationary(target)];
        let mut best = 0.0f64;
        for s in &steps {
            best = best.max(dwell_hours(&model, *s, target, dt));
        }
        assert_eq!(one, best);
        assert_relative_eq!(one, dt, epsilon = 1e-15);
    }

    #[test]
    fn segment_sampling_catches_flyby() {
        let model = DetectionModel::default();
        // 380 km/h for one minute: 6.33 km long segment passing right over
        // the target; endpoint-only checks would miss it
        let step = AgentStep {
            from: Vec2::new(-3.2, 0.0),
            to: Vec2::new(3.2, 0.0),
        };
        let dwell = dwell_hours(&model, step, Vec2::ZERO, 1.0 / 60.0);
        assert!(dwell > 0.0);
        // roughly the chord fraction: 3 km of 6.4 km in range
        let expect = (1.0 / 60.0) * (2.0 * model.radius_km / 6.4);
        assert_relative_eq!(dwell, expect, max_relative = 0.35);
    }

    #[test]
    fn detection_is_bit_reproducible() {
        let model = DetectionModel::default();
        let run = |seed: u64| {
            let mut targets = TargetSet::new(vec![Vec2::ZERO; 100]);
            for step in 0..20 {
                detect_step(
                    &model,
                    &[stationary(Vec2::new(0.5, 0.0))],
                    &mut targets,
                    seed,
                    3,
                    step,
                    step as f64,
                    1.0 / 3600.0,
                )
                .unwrap();
            }
            targets.detected_at
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), run(8));
    }
}
