//! Scenario assembly: the daily search loop, Monte Carlo ensembles over
//! target realizations, the delayed-start experiment, and artifact output.
//!
//! Detection never feeds back into steering (no posterior update), so one
//! deterministic controller pass per scenario serves every Monte Carlo run;
//! only the targets and their detection draws vary with the run index.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::control::{
    follow_waypoints, init_agents_on_nearest_edge, lawnmower_plan, smc_step, AgentState,
    WaypointPlan,
};
use crate::coverage::CoverageState;
use crate::detection::{detect_step, AgentStep, DetectionEvent, DetectionModel, TargetSet};
use crate::domain::ScalarField;
use crate::flow::{integrate, IntegrationOptions, VelocityField};
use crate::geom::{convex_hull, Vec2};
use crate::rng::{stream_rng, Stream};
use crate::scenario::{ControllerKind, ScenarioConfig};
use crate::search_theory::{mismatch_dsmc, mismatch_mdsmc, solve_alpha};
use crate::spectral::SpectralBasis;
use crate::transport::{advect, density, merge_ensembles, seed_halton, TracerEnsemble};
use crate::{Error, Result};

/// Control/detection step: 60 s.
pub const CONTROL_DT_H: f64 = 1.0 / 60.0;
/// Budget look-ahead for the optimal-coverage solve.
pub const ALPHA_WINDOW_H: f64 = 1.0;

/// One control step of the controller pass.
#[derive(Clone, Debug)]
pub struct StepLog {
    pub t_start: f64,
    pub t_end: f64,
    pub segments: Vec<AgentStep>,
}

/// End-of-day conservation audit.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct DayAudit {
    pub day_index: u32,
    pub window_start: f64,
    pub window_end: f64,
    pub n_agents: usize,
    /// Grid integral of the smoothed coverage at the day's end.
    pub coverage_integral: f64,
    /// Total agent-hours searched so far.
    pub searched_hours: f64,
}

/// Deterministic record of the whole controller run: agent motion per step
/// plus the audits, sufficient to replay detection for any target set.
#[derive(Clone, Debug)]
pub struct ControllerTrace {
    pub windows: Vec<(f64, f64)>,
    pub steps: Vec<StepLog>,
    pub day_audits: Vec<DayAudit>,
    /// Sobolev mismatch norm after each step (spectral controllers only).
    pub phi: Vec<f64>,
}

/// One Monte Carlo run: the detected-fraction curve and per-target outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeResult {
    pub curve: Vec<(f64, f64)>,
    pub detection_times: Vec<Option<f64>>,
    pub events: Vec<DetectionEvent>,
    pub final_rate: f64,
}

/// Aggregates over an ensemble of runs.
#[derive(Clone, Debug)]
pub struct EnsembleStats {
    pub runs: Vec<EpisodeResult>,
    /// Pointwise average of the run curves (shared time grid).
    pub mean_curve: Vec<(f64, f64)>,
    /// 20-bin histogram of final success rates on [0, 1].
    pub histogram: Vec<u32>,
}

impl EnsembleStats {
    pub fn finals(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.final_rate).collect()
    }

    pub fn mean_final(&self) -> f64 {
        if self.runs.is_empty() {
            return 0.0;
        }
        self.finals().iter().sum::<f64>() / self.runs.len() as f64
    }

    pub fn std_final(&self) -> f64 {
        let n = self.runs.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.mean_final();
        let var = self
            .finals()
            .iter()
            .map(|f| (f - mean) * (f - mean))
            .sum::<f64>()
            / (n - 1) as f64;
        var.sqrt()
    }

    fn from_runs(runs: Vec<EpisodeResult>) -> Self {
        let mut mean_curve = Vec::new();
        if let Some(first) = runs.first() {
            mean_curve = first.curve.iter().map(|&(t, _)| (t, 0.0)).collect();
            for run in &runs {
                for (acc, &(_, f)) in mean_curve.iter_mut().zip(&run.curve) {
                    acc.1 += f;
                }
            }
            let n = runs.len() as f64;
            for acc in &mut mean_curve {
                acc.1 /= n;
            }
        }
        let mut histogram = vec![0u32; 20];
        for run in &runs {
            let bin = ((run.final_rate * 20.0) as usize).min(19);
            histogram[bin] += 1;
        }
        EnsembleStats {
            runs,
            mean_curve,
            histogram,
        }
    }

    /// Mean fraction of targets detected within each scheduled window.
    pub fn day_fractions(&self, windows: &[(f64, f64)]) -> Vec<f64> {
        let mut out = vec![0.0; windows.len()];
        if self.runs.is_empty() {
            return out;
        }
        for run in &self.runs {
            let n = run.detection_times.len().max(1) as f64;
            for (d, &(start, end)) in windows.iter().enumerate() {
                let count = run
                    .detection_times
                    .iter()
                    .flatten()
                    .filter(|&&t| t >= start - 1e-9 && t <= end + 1e-9)
                    .count();
                out[d] += count as f64 / n;
            }
        }
        for v in &mut out {
            *v /= self.runs.len() as f64;
        }
        out
    }
}

/// Per-offset results of the delayed-start experiment.
#[derive(Clone, Debug)]
pub struct DelayedComparison {
    pub offsets_days: Vec<u32>,
    pub ensembles: Vec<EnsembleStats>,
    pub windows: Vec<Vec<(f64, f64)>>,
    /// Mean per-day detected fractions, per offset.
    pub day_fractions: Vec<Vec<f64>>,
    /// `day_fractions[i] − day_fractions[0]`, per offset.
    pub deltas: Vec<Vec<f64>>,
}

fn max_displacement(a: &TracerEnsemble, b: &TracerEnsemble) -> f64 {
    a.positions()
        .iter()
        .zip(b.positions())
        .map(|(x, y)| x.dist(*y))
        .fold(0.0, f64::max)
}

/// Runs the deterministic controller pass for a scenario (tracers, coverage,
/// steering), recording agent motion per step.
pub fn simulate_controller(cfg: &ScenarioConfig, extra_delay_days: u32) -> Result<ControllerTrace> {
    cfg.validate()?;
    let field = cfg.flow.build(cfg.domain)?;
    controller_pass(cfg, field.as_ref(), extra_delay_days)
}

fn controller_pass(
    cfg: &ScenarioConfig,
    field: &dyn VelocityField,
    extra_delay_days: u32,
) -> Result<ControllerTrace> {
    let opts = IntegrationOptions::default();
    let basis = SpectralBasis::new(cfg.domain, cfg.basis_modes, cfg.beta_for_controller())?;
    let regions = cfg.splash_regions()?;
    let parts: Vec<TracerEnsemble> = regions
        .iter()
        .map(|r| seed_halton(r, cfg.n_tracers))
        .collect::<Result<_>>()?;
    let mut tracers = merge_ensembles(&parts)?;
    let mut coverage = CoverageState::new(cfg.sigma_km)?;

    let mut trace = ControllerTrace {
        windows: Vec::new(),
        steps: Vec::new(),
        day_audits: Vec::new(),
        phi: Vec::new(),
    };
    let mut t = cfg.splash_t0_hours;
    let mut p_cache: Option<ScalarField> = None;

    for (day_pos, day) in cfg.schedule.iter().enumerate() {
        let (w_start, w_end) = cfg.window(day, extra_delay_days);
        trace.windows.push((w_start, w_end));

        let moved_tracers = advect(&tracers, field, w_start, opts)?;
        if p_cache.is_none() || max_displacement(&tracers, &moved_tracers) > 0.0 {
            p_cache = None;
        }
        coverage.drift(field, t, w_start, opts)?;
        tracers = moved_tracers;
        t = w_start;

        if p_cache.is_none() {
            p_cache = Some(density(
                &tracers,
                cfg.domain,
                cfg.grid_nx,
                cfg.grid_ny,
                cfg.bandwidth_km,
            )?);
        }

        // place the fleet and, for lawnmower controllers, plan the sweep
        let mut plan: Option<WaypointPlan> = None;
        let mut agents: Vec<AgentState> = match cfg.controller {
            ControllerKind::Mdsmc | ControllerKind::Dsmc => init_agents_on_nearest_edge(
                cfg.domain,
                tracers.centroid(),
                day.n_agents,
                cfg.agent_speed_kmh,
                cfg.sigma_km,
            ),
            ControllerKind::LawnmowerDrifted => {
                let hull = convex_hull(tracers.positions())?;
                let p = lawnmower_plan(&hull, day.n_agents, cfg.lawnmower_spacing_km)?;
                let agents = agents_at_track_starts(&p, day.n_agents, cfg.agent_speed_kmh);
                plan = Some(p);
                agents
            }
            ControllerKind::LawnmowerReported => {
                let poly = &cfg.sweep_polygons[day_pos % cfg.sweep_polygons.len()];
                let p = lawnmower_plan(poly, day.n_agents, cfg.lawnmower_spacing_km)?;
                let agents = agents_at_track_starts(&p, day.n_agents, cfg.agent_speed_kmh);
                plan = Some(p);
                agents
            }
        };

        while t < w_end - 1e-9 {
            let t_next = (t + CONTROL_DT_H).min(w_end);
            let dt = t_next - t;
            let from: Vec<Vec2> = agents.iter().map(|a| a.position).collect();

            let moved_tracers = advect(&tracers, field, t_next, opts)?;
            let moved = max_displacement(&tracers, &moved_tracers) > 0.0;
            coverage.drift(field, t, t_next, opts)?;
            tracers = moved_tracers;
            if moved || p_cache.is_none() {
                p_cache = Some(density(
                    &tracers,
                    cfg.domain,
                    cfg.grid_nx,
                    cfg.grid_ny,
                    cfg.bandwidth_km,
                )?);
            }
            let p = p_cache.as_ref().unwrap();
            let c_sigma = coverage.smooth(cfg.domain, cfg.grid_nx, cfg.grid_ny)?;

            match cfg.controller {
                ControllerKind::Mdsmc => {
                    // Coverage enters the Koopman plan in sightings units:
                    // effort density times the sensor sweep rate 2·R·v, so
                    // one agent-hour saturates its swept area rather than
                    // one km².
                    let sweep_rate = 2.0 * cfg.detection_radius_km * cfg.agent_speed_kmh;
                    let budget = (c_sigma.integrate() + day.n_agents as f64 * ALPHA_WINDOW_H)
                        * sweep_rate;
                    let mut c_detect = c_sigma.clone();
                    c_detect.scale(sweep_rate);
                    let koopman = solve_alpha(p, budget, None)?;
                    let mismatch = mismatch_mdsmc(p, koopman.alpha, &c_detect, None)?;
                    let info = smc_step(&mut agents, &mismatch, &basis, dt)?;
                    trace.phi.push(info.phi);
                }
                ControllerKind::Dsmc => {
                    let total = coverage.total_searched_hours();
                    let mismatch =
                        mismatch_dsmc(p, &c_sigma, day.n_agents, total / day.n_agents as f64)?;
                    let info = smc_step(&mut agents, &mismatch, &basis, dt)?;
                    trace.phi.push(info.phi);
                }
                ControllerKind::LawnmowerDrifted | ControllerKind::LawnmowerReported => {
                    follow_waypoints(&mut agents, plan.as_mut().unwrap(), dt)?;
                }
            }
            coverage.deposit(&agents, dt)?;

            trace.steps.push(StepLog {
                t_start: t,
                t_end: t_next,
                segments: from
                    .into_iter()
                    .zip(&agents)
                    .map(|(f, a)| AgentStep {
                        from: f,
                        to: a.position,
                    })
                    .collect(),
            });
            t = t_next;
        }

        let c_sigma = coverage.smooth(cfg.domain, cfg.grid_nx, cfg.grid_ny)?;
        trace.day_audits.push(DayAudit {
            day_index: day.day_index,
            window_start: w_start,
            window_end: w_end,
            n_agents: day.n_agents,
            coverage_integral: c_sigma.integrate(),
            searched_hours: coverage.total_searched_hours(),
        });
        coverage.merge_colocated(cfg.sigma_km / 4.0);
    }
    Ok(trace)
}

fn agents_at_track_starts(plan: &WaypointPlan, n: usize, speed: f64) -> Vec<AgentState> {
    let starts = plan.start_positions();
    (0..n)
        .map(|i| {
            let pos = starts.get(i).copied().flatten().unwrap_or(Vec2::ZERO);
            AgentState::new(pos, speed, Vec2::new(1.0, 0.0))
        })
        .collect()
}

/// Samples target initial positions uniformly over the splash polygons (equal
/// mass per region, matching the tracer seeding), from the per-run stream.
fn seed_targets(cfg: &ScenarioConfig, run_index: u64) -> Result<Vec<Vec2>> {
    let mut rng = stream_rng(cfg.seed, Stream::Targets, &[run_index]);
    let regions = cfg.splash_regions()?;
    let mut out = Vec::with_capacity(cfg.n_targets);
    for _ in 0..cfg.n_targets {
        let region = &regions[if regions.len() == 1 {
            0
        } else {
            rng.gen_range(0..regions.len())
        }];
        let (lo, hi) = region.polygon.bounding_box();
        let mut guard = 0;
        loop {
            let p = Vec2::new(
                lo.x + (hi.x - lo.x) * rng.gen::<f64>(),
                lo.y + (hi.y - lo.y) * rng.gen::<f64>(),
            );
            if region.polygon.contains(p) {
                out.push(p);
                break;
            }
            guard += 1;
            if guard > 100_000 {
                return Err(Error::Degenerate(
                    "target rejection sampling failed; polygon too thin?".into(),
                ));
            }
        }
    }
    Ok(out)
}

fn detection_replay(
    cfg: &ScenarioConfig,
    field: &dyn VelocityField,
    trace: &ControllerTrace,
    run_index: u64,
) -> Result<EpisodeResult> {
    let opts = IntegrationOptions::default();
    let model = DetectionModel::new(cfg.detection_radius_km, cfg.detection_mean_time_s)?;
    let mut targets = TargetSet::new(seed_targets(cfg, run_index)?);
    let mut t = cfg.splash_t0_hours;
    let mut curve = vec![(t, 0.0)];
    let mut events = Vec::new();

    for (step_index, step) in trace.steps.iter().enumerate() {
        if step.t_start > t + 1e-9 {
            // drift through the gap to the window start
            advect_targets(&mut targets, field, t, step.t_start, opts)?;
            t = step.t_start;
            curve.push((t, targets.detected_fraction()));
        }
        advect_targets(&mut targets, field, t, step.t_end, opts)?;
        let new_events = detect_step(
            &model,
            &step.segments,
            &mut targets,
            cfg.seed,
            run_index,
            step_index as u64,
            step.t_end,
            step.t_end - step.t_start,
        )?;
        events.extend(new_events);
        t = step.t_end;
        curve.push((t, targets.detected_fraction()));
    }

    Ok(EpisodeResult {
        final_rate: targets.detected_fraction(),
        detection_times: targets.detected_at.clone(),
        events,
        curve,
    })
}

fn advect_targets(
    targets: &mut TargetSet,
    field: &dyn VelocityField,
    t1: f64,
    t2: f64,
    opts: IntegrationOptions,
) -> Result<()> {
    if t2 <= t1 {
        return Ok(());
    }
    for (i, pos) in targets.positions.iter_mut().enumerate() {
        if targets.detected_at[i].is_some() {
            continue; // detected targets are out of the game; freeze them
        }
        *pos = integrate(field, *pos, t1, t2, opts)?;
    }
    Ok(())
}

/// Runs one full episode: the deterministic controller pass plus the
/// stochastic detection for `run_index`. Bit-identical for identical
/// `(config, run_index)`.
pub fn run_episode(cfg: &ScenarioConfig, run_index: u64) -> Result<EpisodeResult> {
    cfg.validate()?;
    let field = cfg.flow.build(cfg.domain)?;
    let trace = controller_pass(cfg, field.as_ref(), 0)?;
    detection_replay(cfg, field.as_ref(), &trace, run_index)
}

/// Runs the configured ensemble: one controller pass, `n_runs` detection
/// replays with run-indexed streams.
pub fn run_ensemble(cfg: &ScenarioConfig) -> Result<(ControllerTrace, EnsembleStats)> {
    run_ensemble_delayed(cfg, 0)
}

/// Ensemble with an extra schedule delay (the delayed-start experiment).
pub fn run_ensemble_delayed(
    cfg: &ScenarioConfig,
    extra_delay_days: u32,
) -> Result<(ControllerTrace, EnsembleStats)> {
    cfg.validate()?;
    let field = cfg.flow.build(cfg.domain)?;
    let trace = controller_pass(cfg, field.as_ref(), extra_delay_days)?;
    let runs: Result<Vec<EpisodeResult>> = (0..cfg.n_runs as u64)
        .into_par_iter()
        .map(|i| detection_replay(cfg, field.as_ref(), &trace, i))
        .collect();
    Ok((trace, EnsembleStats::from_runs(runs?)))
}

/// Runs the ensemble once per start offset with identical per-run target
/// seeds, and tabulates per-day success rates and their deltas against the
/// first offset.
pub fn delayed_start_experiment(
    cfg: &ScenarioConfig,
    offsets_days: &[u32],
) -> Result<DelayedComparison> {
    if offsets_days.is_empty() {
        return Err(Error::config("delayed experiment needs at least one offset"));
    }
    let mut ensembles = Vec::new();
    let mut windows = Vec::new();
    for &off in offsets_days {
        let (trace, stats) = run_ensemble_delayed(cfg, off)?;
        windows.push(trace.windows.clone());
        ensembles.push(stats);
    }
    let day_fractions: Vec<Vec<f64>> = ensembles
        .iter()
        .zip(&windows)
        .map(|(e, w)| e.day_fractions(w))
        .collect();
    let base = day_fractions[0].clone();
    let deltas = day_fractions
        .iter()
        .map(|row| row.iter().zip(&base).map(|(a, b)| a - b).collect())
        .collect();
    Ok(DelayedComparison {
        offsets_days: offsets_days.to_vec(),
        ensembles,
        windows,
        day_fractions,
        deltas,
    })
}

/// Writes the standard ensemble artifacts into `dir`:
/// `success_curve.csv`, `final_rates.csv`, `trajectories.ndjson`,
/// `detections/run_NNNN.ndjson`, and `summary.json`.
pub fn write_ensemble_outputs(
    dir: &Path,
    cfg: &ScenarioConfig,
    trace: &ControllerTrace,
    stats: &EnsembleStats,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    crate::io::atomic_write(&dir.join("success_curve.csv"), |w| {
        writeln!(w, "run_id,t_hours,detected_fraction")?;
        for (run_id, run) in stats.runs.iter().enumerate() {
            for &(t, f) in &run.curve {
                writeln!(w, "{run_id},{t:.4},{f}")?;
            }
        }
        Ok(())
    })?;
    crate::io::atomic_write(&dir.join("final_rates.csv"), |w| {
        writeln!(w, "run_id,final_fraction")?;
        for (run_id, run) in stats.runs.iter().enumerate() {
            writeln!(w, "{run_id},{}", run.final_rate)?;
        }
        Ok(())
    })?;
    crate::io::atomic_write(&dir.join("trajectories.ndjson"), |w| {
        for step in &trace.steps {
            for (agent_id, seg) in step.segments.iter().enumerate() {
                let rec = serde_json::json!({
                    "t_hours": round6(step.t_end),
                    "agent_id": agent_id,
                    "x_km": round6(seg.to.x),
                    "y_km": round6(seg.to.y),
                });
                writeln!(w, "{rec}")?;
            }
        }
        Ok(())
    })?;
    let det_dir = dir.join("detections");
    std::fs::create_dir_all(&det_dir)?;
    for (run_id, run) in stats.runs.iter().enumerate() {
        crate::io::atomic_write(&det_dir.join(format!("run_{run_id:04}.ndjson")), |w| {
            for e in &run.events {
                let rec = serde_json::json!({
                    "t_hours": round6(e.t_hours),
                    "target_id": e.target_id,
                    "agent_id": e.agent_id,
                    "x_km": round6(e.x_km),
                    "y_km": round6(e.y_km),
                });
                writeln!(w, "{rec}")?;
            }
            Ok(())
        })?;
    }
    let summary = serde_json::json!({
        "config": cfg.summary_json(),
        "results": {
            "n_runs": stats.runs.len(),
            "mean_final_rate": stats.mean_final(),
            "std_final_rate": stats.std_final(),
            "min_final_rate": stats.finals().iter().cloned().fold(f64::INFINITY, f64::min),
            "max_final_rate": stats.finals().iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            "histogram_bins": stats.histogram,
            "day_fractions": stats.day_fractions(&trace.windows),
        },
        "audits": trace.day_audits,
    });
    crate::io::atomic_write(&dir.join("summary.json"), |w| {
        writeln!(w, "{}", serde_json::to_string_pretty(&summary).unwrap())
    })?;
    Ok(())
}

/// Writes the delayed-start comparison: per-offset mean curves and per-day
/// deltas.
pub fn write_delayed_outputs(
    dir: &Path,
    cfg: &ScenarioConfig,
    cmp: &DelayedComparison,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    crate::io::atomic_write(&dir.join("delayed_curves.csv"), |w| {
        writeln!(w, "offset_days,t_hours,mean_detected_fraction")?;
        for (off, stats) in cmp.offsets_days.iter().zip(&cmp.ensembles) {
            for &(t, f) in &stats.mean_curve {
                writeln!(w, "{off},{t:.4},{f}")?;
            }
        }
        Ok(())
    })?;
    crate::io::atomic_write(&dir.join("delayed_deltas.csv"), |w| {
        writeln!(w, "offset_days,day_index,mean_day_fraction,delta_vs_first")?;
        for (i, off) in cmp.offsets_days.iter().enumerate() {
            for (d, (frac, delta)) in cmp.day_fractions[i]
                .iter()
                .zip(&cmp.deltas[i])
                .enumerate()
            {
                writeln!(w, "{off},{d},{frac},{delta}")?;
            }
        }
        Ok(())
    })?;
    let summary = serde_json::json!({
        "config": cfg.summary_json(),
        "offsets_days": cmp.offsets_days,
        "mean_final_rates": cmp.ensembles.iter().map(|e| e.mean_final()).collect::<Vec<_>>(),
        "day_fractions": cmp.day_fractions,
        "deltas_vs_first": cmp.deltas,
    });
    crate::io::atomic_write(&dir.join("summary.json"), |w| {
        writeln!(w, "{}", serde_json::to_string_pretty(&summary).unwrap())
    })?;
    Ok(())
}

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}
