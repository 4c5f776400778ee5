//! Acceptance suite: one test per release criterion, each printing a
//! `[PASS]`/`[FAIL]` line. Run with `cargo test --test acceptance`
//! (`-- --nocapture` to see the lines for passing criteria too).
//!
//! The tests share a gate so wall-clock measurements are not distorted by
//! concurrent heavy work.

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use driftsearch_core::control::AgentState;
use driftsearch_core::coverage::CoverageState;
use driftsearch_core::detection::{detect_step, DetectionModel, TargetSet};
use driftsearch_core::flow::{integrate, integrate_fixed_rk4, AnalyticFlow, IntegrationOptions};
use driftsearch_core::hypergraph::{classify, MixingClass};
use driftsearch_core::scenario::{ControllerKind, ScenarioConfig};
use driftsearch_core::search_theory::{mismatch_mdsmc, solve_alpha};
use driftsearch_core::sim;
use driftsearch_core::{Domain, ScalarField, Vec2};

static GATE: Mutex<()> = Mutex::new(());

fn gate() -> std::sync::MutexGuard<'static, ()> {
    GATE.lock().unwrap_or_else(|e| e.into_inner())
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn report(criterion: &str, pass: bool, detail: String) {
    println!(
        "[{}] criterion {criterion}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion}: {detail}");
}

#[test]
fn criterion_1_conservation_and_runtime() {
    let _g = gate();
    let mut cfg = ScenarioConfig::parse_file(&scenario("double_gyre_benchmark.cfg")).unwrap();
    cfg.n_runs = 1;
    assert_eq!(cfg.grid_nx, 128);
    assert_eq!(cfg.n_tracers, 10_000);
    assert_eq!(cfg.schedule.len(), 3);
    assert!(cfg.schedule.iter().all(|d| d.n_agents == 10));

    let t0 = Instant::now();
    let (trace, _stats) = sim::run_ensemble(&cfg).unwrap();
    let wall = t0.elapsed().as_secs_f64();

    let mut worst = 0.0f64;
    for audit in &trace.day_audits {
        let rel =
            (audit.coverage_integral - audit.searched_hours).abs() / audit.searched_hours;
        worst = worst.max(rel);
    }
    let conserved = worst < 2e-2;
    let smoothing_exact = worst < 1e-9; // no coverage mass leaves this domain
    let fast = wall < 60.0;
    report(
        "1 (conservation & runtime)",
        conserved && smoothing_exact && fast,
        format!(
            "worst |∫c_σ − agent·h|/agent·h = {worst:.2e} (< 2e-2, smoothing bound 1e-9), episode wall {wall:.1}s (< 60s)"
        ),
    );
}

#[test]
fn criterion_2_integrator_order() {
    let _g = gate();
    let omega = 2.0 * std::f64::consts::PI;
    let field = AnalyticFlow::Rotation {
        omega,
        center: Vec2::ZERO,
    };
    let x0 = Vec2::new(50.0, 0.0);
    let t_end = 1.0;
    let exact = Vec2::new(
        x0.x * (omega * t_end).cos(),
        x0.x * (omega * t_end).sin(),
    );
    let mut pts = Vec::new();
    let mut h = 0.25;
    while h >= 1.0 / 64.0 - 1e-12 {
        let err = integrate_fixed_rk4(&field, x0, 0.0, t_end, h).dist(exact);
        pts.push((h.log2(), err.log2()));
        h /= 2.0;
    }
    let n = pts.len() as f64;
    let (sx, sy): (f64, f64) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let order = (n * sxy - sx * sy) / (n * sxx - sx * sx);

    let slow = AnalyticFlow::Rotation {
        omega: 2.0 * std::f64::consts::PI / 24.0,
        center: Vec2::new(100.0, 100.0),
    };
    let start = Vec2::new(150.0, 100.0);
    let closed = integrate(
        &slow,
        start,
        0.0,
        24.0,
        IntegrationOptions::with_tol(1e-9),
    )
    .unwrap();
    let closure = closed.dist(start);

    report(
        "2 (integrator order)",
        order >= 3.9 && closure < 1e-6,
        format!("observed RK4 order {order:.3} (>= 3.9), adaptive period closure {closure:.2e} km (< 1e-6)"),
    );
}

#[test]
fn criterion_3_alpha_solver() {
    let _g = gate();
    let domain = Domain::new(0.0, 10.0, 0.0, 10.0).unwrap();

    // residual on 20 random fields
    let mut worst_residual = 0.0f64;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ScalarField::zeros(domain, 24, 24).unwrap();
        for v in p.values_mut() {
            *v = rng.gen::<f64>().powi(2) + 1e-4;
        }
        let total = p.integrate();
        p.scale(1.0 / total);
        for budget in [0.7, 5.0, 40.0] {
            let plan = solve_alpha(&p, budget, None).unwrap();
            let resid = (plan.c_opt.integrate() - budget).abs() / budget.max(1.0);
            worst_residual = worst_residual.max(resid);
        }
    }

    // uniform closed form
    let p = ScalarField::constant(domain, 32, 32, 1.0 / domain.area()).unwrap();
    let budget = 42.0;
    let plan = solve_alpha(&p, budget, None).unwrap();
    let alpha_expected = (1.0 / domain.area()).ln() - budget / domain.area();
    let uniform_err = (plan.alpha - alpha_expected).abs();

    // incremental-planning consistency
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut p = ScalarField::zeros(domain, 24, 24).unwrap();
    for v in p.values_mut() {
        *v = rng.gen::<f64>() + 0.01;
    }
    let total = p.integrate();
    p.scale(1.0 / total);
    let (b1, b2) = (4.0, 9.0);
    let stage1 = solve_alpha(&p, b1, None).unwrap();
    let combined = solve_alpha(&p, b1 + b2, None).unwrap();
    let stage2 = mismatch_mdsmc(&p, combined.alpha, &stage1.c_opt, None).unwrap();
    let mut l1 = 0.0;
    for ((a, b), c) in stage1
        .c_opt
        .values()
        .iter()
        .zip(stage2.field.values())
        .zip(combined.c_opt.values())
    {
        l1 += (a + b - c).abs();
    }
    l1 *= combined.c_opt.cell_area();

    report(
        "3 (alpha solver)",
        worst_residual <= 1e-6 && uniform_err < 1e-9 && l1 < 1e-5,
        format!(
            "worst residual {worst_residual:.2e} (<= 1e-6·max(budget,1)), uniform-field alpha error {uniform_err:.2e} (< 1e-9), incremental L1 {l1:.2e} (< 1e-5)"
        ),
    );
}

#[test]
fn criterion_4_detection_law() {
    let _g = gate();
    let model = DetectionModel::default();
    let n = 10_000usize;
    let agent = driftsearch_core::detection::AgentStep {
        from: Vec2::ZERO,
        to: Vec2::ZERO,
    };
    let mut targets = TargetSet::new(vec![Vec2::ZERO; n]);
    let dt_s = 0.5;
    let mut step = 0u64;
    let mut detail = String::new();
    let mut ok = true;
    for checkpoint_s in [1.0, 2.0, 4.0] {
        while (step as f64) * dt_s < checkpoint_s {
            detect_step(
                &model,
                &[agent],
                &mut targets,
                424_242,
                0,
                step,
                0.0,
                dt_s / 3600.0,
            )
            .unwrap();
            step += 1;
        }
        let expect = 1.0 - (-checkpoint_s / model.mean_time_s).exp();
        let got = targets.detected_fraction();
        let sigma = (expect * (1.0 - expect) / n as f64).sqrt();
        let z = (got - expect).abs() / sigma;
        ok &= z < 3.0;
        detail.push_str(&format!("t={checkpoint_s}s: |z|={z:.2}; "));
    }
    report(
        "4 (detection law)",
        ok,
        format!("{detail}all within 3σ of 1−e^(−t/T) over 10^4 trials"),
    );
}

#[test]
fn criterion_5_ergodic_tendency() {
    let _g = gate();
    let cfg = ScenarioConfig::parse_file(&scenario("uniform_static.cfg")).unwrap();
    let trace = sim::simulate_controller(&cfg, 0).unwrap();

    // rebuild coverage from the trace (still water: deposits never move)
    let mut coverage = CoverageState::new(cfg.sigma_km).unwrap();
    let mut steps = trace.steps.iter().peekable();
    let uniform = 1.0 / cfg.domain.area();
    let window_start = trace.windows[0].0;
    let mut prev = f64::INFINITY;
    let mut non_increasing = 0;
    let mut transitions = 0;
    for hour in 1..=12 {
        let t_checkpoint = window_start + hour as f64;
        while steps
            .peek()
            .map(|s| s.t_end <= t_checkpoint + 1e-9)
            .unwrap_or(false)
        {
            let step = steps.next().unwrap();
            let agents: Vec<AgentState> = step
                .segments
                .iter()
                .map(|s| AgentState::new(s.to, cfg.agent_speed_kmh, Vec2::new(1.0, 0.0)))
                .collect();
            coverage
                .deposit(&agents, step.t_end - step.t_start)
                .unwrap();
        }
        let c = coverage
            .smooth(cfg.domain, cfg.grid_nx, cfg.grid_ny)
            .unwrap();
        let total = c.integrate();
        let mut num = 0.0;
        for v in c.values() {
            let d = v / total - uniform;
            num += d * d;
        }
        let dev = (num * c.cell_area()).sqrt() / (uniform * cfg.domain.area().sqrt());
        if hour > 1 {
            transitions += 1;
            if dev <= prev + 1e-12 {
                non_increasing += 1;
            }
        }
        prev = dev;
    }
    let needed = (0.8 * transitions as f64).ceil() as usize;
    report(
        "5 (ergodic tendency)",
        non_increasing >= needed,
        format!(
            "coverage deviation non-increasing at {non_increasing}/{transitions} hourly checkpoints (need >= {needed})"
        ),
    );
}

#[test]
fn criterion_6_benchmark_ordering() {
    let _g = gate();
    let t0 = Instant::now();
    let base = ScenarioConfig::parse_file(&scenario("double_gyre_benchmark.cfg")).unwrap();
    assert_eq!(base.n_runs, 50);
    assert_eq!(base.n_targets, 1000);

    let mut finals = std::collections::BTreeMap::new();
    for kind in [
        ControllerKind::Mdsmc,
        ControllerKind::Dsmc,
        ControllerKind::LawnmowerDrifted,
    ] {
        let mut cfg = base.clone();
        cfg.controller = kind;
        let (_, stats) = sim::run_ensemble(&cfg).unwrap();
        finals.insert(kind.name(), stats.finals());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mdsmc = &finals["mdsmc"];
    let dsmc = &finals["dsmc"];
    let lawn = &finals["lawnmower_drifted"];
    let (m_mean, d_mean, l_mean) = (mean(mdsmc), mean(dsmc), mean(lawn));

    // paired bootstrap over shared run indices (same target seeds per run)
    let diffs: Vec<f64> = mdsmc.iter().zip(lawn).map(|(a, b)| a - b).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0xB007);
    let mut resampled: Vec<f64> = (0..10_000)
        .map(|_| {
            let mut acc = 0.0;
            for _ in 0..diffs.len() {
                acc += diffs[rng.gen_range(0..diffs.len())];
            }
            acc / diffs.len() as f64
        })
        .collect();
    resampled.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ci_lo = resampled[250];
    let ci_hi = resampled[9_749];

    let wall = t0.elapsed().as_secs_f64();
    let pass = m_mean >= 1.2 * l_mean && m_mean >= d_mean - 0.02 && ci_lo > 0.0 && wall < 7200.0;
    report(
        "6 (benchmark ordering)",
        pass,
        format!(
            "means: mdsmc {m_mean:.4}, dsmc {d_mean:.4}, lawnmower {l_mean:.4}; \
             mdsmc/lawnmower = {:.2} (>= 1.2); mdsmc - dsmc = {:+.4} (>= -0.02); \
             paired 95% bootstrap CI of (mdsmc - lawnmower) = [{ci_lo:.4}, {ci_hi:.4}] excludes 0; wall {wall:.0}s (< 7200)",
            m_mean / l_mean,
            m_mean - d_mean
        ),
    );
}

#[test]
fn criterion_7_hypergraph() {
    let _g = gate();
    let opts = IntegrationOptions::with_tol(1e-8);

    let saddle_domain = Domain::new(-20.0, 20.0, -20.0, 20.0).unwrap();
    let saddle = AnalyticFlow::Saddle {
        rate: 0.3,
        center: Vec2::ZERO,
    };
    let hg = classify(&saddle, saddle_domain, 10, 10, 0.0, 2.0, 0.5, opts).unwrap();
    let saddle_frac = hg.hyperbolic_fraction();

    let rotation = AnalyticFlow::Rotation {
        omega: 0.4,
        center: Vec2::ZERO,
    };
    let hg = classify(&rotation, saddle_domain, 10, 10, 0.0, 3.0, 0.5, opts).unwrap();
    let rot_frac = hg.hyperbolic_fraction();

    // stencil halving churn on a double gyre resolved at 5 km cells
    let gyre_domain = Domain::new(0.0, 240.0, 0.0, 120.0).unwrap();
    let gyre = AnalyticFlow::DoubleGyre {
        domain: gyre_domain,
        amplitude: 153.0,
        epsilon: 0.35,
        omega: 0.0873,
    };
    let coarse = classify(&gyre, gyre_domain, 48, 24, 0.0, 48.0, 1.0, opts).unwrap();
    let fine = classify(&gyre, gyre_domain, 48, 24, 0.0, 48.0, 0.5, opts).unwrap();
    let churn = coarse
        .labels
        .iter()
        .zip(&fine.labels)
        .filter(|(a, b)| a != b)
        .count() as f64
        / coarse.labels.len() as f64;
    let gyre_frac = fine.hyperbolic_fraction();
    let ridge_ok = gyre_frac >= 0.05 && gyre_frac <= 0.60;
    let elliptic_count = fine
        .labels
        .iter()
        .filter(|&&l| l == MixingClass::Mesoelliptic)
        .count();

    report(
        "7 (hypergraph)",
        saddle_frac == 1.0 && rot_frac == 0.0 && churn <= 0.02 && ridge_ok,
        format!(
            "saddle 100% mesohyperbolic ({saddle_frac}), rotation 100% mesoelliptic (hyper {rot_frac}), \
             double-gyre churn under stencil halving {:.2}% (<= 2%), hyperbolic fraction {gyre_frac:.2} in [0.05, 0.60] ({elliptic_count} elliptic cells)",
            100.0 * churn
        ),
    );
}

#[test]
fn criterion_8_delayed_start() {
    let _g = gate();
    let cfg = ScenarioConfig::parse_file(&scenario("double_gyre_delayed.cfg")).unwrap();
    let cmp = sim::delayed_start_experiment(&cfg, &[0, 5, 10]).unwrap();

    let dir = tempfile::tempdir().unwrap();
    sim::write_delayed_outputs(dir.path(), &cfg, &cmp).unwrap();
    let curves = std::fs::read_to_string(dir.path().join("delayed_curves.csv")).unwrap();
    let deltas = std::fs::read_to_string(dir.path().join("delayed_deltas.csv")).unwrap();

    let offsets_present = [0, 5, 10]
        .iter()
        .all(|o| curves.lines().any(|l| l.starts_with(&format!("{o},"))));
    let delta_rows = deltas.lines().count() - 1;
    let complete = cmp.ensembles.iter().all(|e| e.runs.len() == cfg.n_runs);
    // the qualitative convergence-zone effect: some delayed offset beats the
    // immediate start on first-day detections in at least one of 5 seeds
    let mut small = cfg.clone();
    small.n_runs = 3;
    small.n_targets = 300;
    small.n_tracers = 3000;
    small.schedule.truncate(1);
    let mut wins = 0;
    for seed in 1..=5 {
        small.seed = seed;
        let probe = sim::delayed_start_experiment(&small, &[0, 5]).unwrap();
        if probe.day_fractions[1][0] > probe.day_fractions[0][0] {
            wins += 1;
        }
    }

    report(
        "8 (delayed start)",
        offsets_present && delta_rows == 9 && complete && wins >= 1,
        format!(
            "offsets {{0,5,10}} ran end-to-end ({} runs each), curves and {delta_rows} delta rows emitted, \
             delayed start improved day-one detections in {wins}/5 seeds",
            cfg.n_runs
        ),
    );
}
