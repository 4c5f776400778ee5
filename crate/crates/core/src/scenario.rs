//! Scenario configuration: the full experiment description, its
//! `[section]`/`key = value` text format, and validation.
//!
//! The format accepts `#` comments, rejects unknown sections and keys with
//! line-numbered errors, and round-trips through [`ScenarioConfig::serialize`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::domain::Domain;
use crate::flow::{read_ovf1, AnalyticFlow, VelocityField};
use crate::geom::{Polygon, Vec2};
use crate::transport::SplashRegion;
use crate::{Error, Result};

/// Velocity source named in a scenario file.
#[derive(Clone, Debug, PartialEq)]
pub enum FlowSpec {
    Uniform { u: f64, v: f64 },
    Rotation { omega: f64, cx: f64, cy: f64 },
    Saddle { rate: f64, cx: f64, cy: f64 },
    DoubleGyre { amplitude: f64, epsilon: f64, omega: f64 },
    Gridded { path: PathBuf },
}

impl FlowSpec {
    pub fn build(&self, domain: Domain) -> Result<Box<dyn VelocityField>> {
        Ok(match self {
            FlowSpec::Uniform { u, v } => Box::new(AnalyticFlow::Uniform { u: *u, v: *v }),
            FlowSpec::Rotation { omega, cx, cy } => Box::new(AnalyticFlow::Rotation {
                omega: *omega,
                center: Vec2::new(*cx, *cy),
            }),
            FlowSpec::Saddle { rate, cx, cy } => Box::new(AnalyticFlow::Saddle {
                rate: *rate,
                center: Vec2::new(*cx, *cy),
            }),
            FlowSpec::DoubleGyre {
                amplitude,
                epsilon,
                omega,
            } => Box::new(AnalyticFlow::DoubleGyre {
                domain,
                amplitude: *amplitude,
                epsilon: *epsilon,
                omega: *omega,
            }),
            FlowSpec::Gridded { path } => Box::new(read_ovf1(path)?),
        })
    }
}

/// Which controller steers the fleet.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ControllerKind {
    Mdsmc,
    Dsmc,
    /// Lawnmower over user-supplied sweep polygons (the as-reported search).
    LawnmowerReported,
    /// Lawnmower over the convex hull of the drifted distribution.
    LawnmowerDrifted,
}

impl ControllerKind {
    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Mdsmc => "mdsmc",
            ControllerKind::Dsmc => "dsmc",
            ControllerKind::LawnmowerReported => "lawnmower_reported",
            ControllerKind::LawnmowerDrifted => "lawnmower_drifted",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "mdsmc" => Some(ControllerKind::Mdsmc),
            "dsmc" => Some(ControllerKind::Dsmc),
            "lawnmower_reported" => Some(ControllerKind::LawnmowerReported),
            "lawnmower_drifted" => Some(ControllerKind::LawnmowerDrifted),
            _ => None,
        }
    }
}

/// One scheduled search day.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchDay {
    /// Days since the splash-day midnight.
    pub day_index: u32,
    /// Window start within the day, hours UTC.
    pub window_start_h: f64,
    /// Window end within the day, hours UTC.
    pub window_end_h: f64,
    pub n_agents: usize,
}

/// Full experiment description.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub domain: Domain,
    pub flow: FlowSpec,
    pub splash_polygons: Vec<Polygon>,
    /// Splash instant, absolute hours from day-0 midnight.
    pub splash_t0_hours: f64,
    pub schedule: Vec<SearchDay>,
    pub agent_speed_kmh: f64,
    pub controller: ControllerKind,
    pub sigma_km: f64,
    pub beta_mdsmc: f64,
    pub beta_dsmc: f64,
    pub lawnmower_spacing_km: f64,
    pub sweep_polygons: Vec<Polygon>,
    pub detection_radius_km: f64,
    pub detection_mean_time_s: f64,
    pub n_tracers: usize,
    pub bandwidth_km: f64,
    pub grid_nx: usize,
    pub grid_ny: usize,
    pub basis_modes: usize,
    pub n_targets: usize,
    pub n_runs: usize,
    pub seed: u64,
    pub start_delay_days: u32,
}

impl ScenarioConfig {
    /// Absolute window for a scheduled day, shifted by `extra_delay_days` on
    /// top of the configured start delay.
    pub fn window(&self, day: &SearchDay, extra_delay_days: u32) -> (f64, f64) {
        let base = (day.day_index + self.start_delay_days + extra_delay_days) as f64 * 24.0;
        (base + day.window_start_h, base + day.window_end_h)
    }

    pub fn splash_regions(&self) -> Result<Vec<SplashRegion>> {
        self.splash_polygons
            .iter()
            .map(|p| SplashRegion::new(p.clone(), self.splash_t0_hours))
            .collect()
    }

    pub fn beta_for_controller(&self) -> f64 {
        match self.controller {
            ControllerKind::Dsmc => self.beta_dsmc,
            _ => self.beta_mdsmc,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.splash_polygons.is_empty() {
            return Err(Error::config("at least one splash polygon is required"));
        }
        for p in &self.splash_polygons {
            for v in p.vertices() {
                if !self.domain.contains(*v) {
                    return Err(Error::config(format!(
                        "splash polygon vertex ({}, {}) outside the domain",
                        v.x, v.y
                    )));
                }
            }
        }
        self.splash_regions()?;
        if self.agent_speed_kmh <= 0.0 {
            return Err(Error::config("agent speed must be positive"));
        }
        for (name, v) in [
            ("sigma_km", self.sigma_km),
            ("lawnmower_spacing_km", self.lawnmower_spacing_km),
            ("radius_km", self.detection_radius_km),
            ("mean_time_s", self.detection_mean_time_s),
            ("bandwidth_km", self.bandwidth_km),
        ] {
            if v <= 0.0 {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        if self.beta_mdsmc >= 0.0 || self.beta_dsmc >= 0.0 {
            return Err(Error::config("Sobolev indices must be negative"));
        }
        if self.n_targets < 1 || self.n_runs < 1 {
            return Err(Error::config("n_targets and n_runs must be at least 1"));
        }
        if self.n_tracers < 1 {
            return Err(Error::config("n_tracers must be at least 1"));
        }
        if self.grid_nx < 2 || self.grid_ny < 2 {
            return Err(Error::config("grid must be at least 2x2"));
        }
        if self.basis_modes < 1 {
            return Err(Error::config("basis needs at least one mode"));
        }
        if 4 * self.basis_modes > self.grid_nx.min(self.grid_ny) {
            return Err(Error::config(format!(
                "modes {} too high for grid {}x{} (need modes <= min(nx,ny)/4 to avoid aliasing)",
                self.basis_modes, self.grid_nx, self.grid_ny
            )));
        }
        // schedule ordered, windows sane and non-overlapping
        let mut prev_end = f64::NEG_INFINITY;
        for day in &self.schedule {
            if !(day.window_start_h >= 0.0
                && day.window_end_h <= 24.0
                && day.window_end_h > day.window_start_h)
            {
                return Err(Error::config(format!(
                    "day {}: window {}..{} invalid",
                    day.day_index, day.window_start_h, day.window_end_h
                )));
            }
            if day.n_agents == 0 {
                return Err(Error::config(format!(
                    "day {}: needs at least one agent",
                    day.day_index
                )));
            }
            let (start, end) = self.window(day, 0);
            if start <= prev_end {
                return Err(Error::config(
                    "schedule windows must be ordered and non-overlapping",
                ));
            }
            prev_end = end;
        }
        if let Some(first) = self.schedule.first() {
            if self.window(first, 0).0 < self.splash_t0_hours {
                return Err(Error::config(
                    "first search window precedes the splash time",
                ));
            }
        }
        if self.controller == ControllerKind::LawnmowerReported && self.sweep_polygons.is_empty() {
            return Err(Error::config(
                "lawnmower_reported requires at least one sweep_polygon",
            ));
        }
        Ok(())
    }

    pub fn parse_file(path: &Path) -> Result<ScenarioConfig> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<ScenarioConfig> {
        Self::parse_with_overrides(text, &[])
    }

    /// Parses with `section.key=value` overrides applied on top of the file
    /// content. Overrides may only touch single-valued keys.
    pub fn parse_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut entries = tokenize(text)?;
        for (key_path, value) in overrides {
            apply_override(&mut entries, key_path, value)?;
        }
        build_config(&entries)
    }

    /// Canonical text form; `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[domain]");
        let _ = writeln!(s, "x_min = {}", self.domain.x_min);
        let _ = writeln!(s, "x_max = {}", self.domain.x_max);
        let _ = writeln!(s, "y_min = {}", self.domain.y_min);
        let _ = writeln!(s, "y_max = {}", self.domain.y_max);
        let _ = writeln!(s, "\n[flow]");
        match &self.flow {
            FlowSpec::Uniform { u, v } => {
                let _ = writeln!(s, "kind = uniform\nu = {u}\nv = {v}");
            }
            FlowSpec::Rotation { omega, cx, cy } => {
                let _ = writeln!(s, "kind = rotation\nomega = {omega}\ncenter_x = {cx}\ncenter_y = {cy}");
            }
            FlowSpec::Saddle { rate, cx, cy } => {
                let _ = writeln!(s, "kind = saddle\nrate = {rate}\ncenter_x = {cx}\ncenter_y = {cy}");
            }
            FlowSpec::DoubleGyre {
                amplitude,
                epsilon,
                omega,
            } => {
                let _ = writeln!(
                    s,
                    "kind = double_gyre\namplitude = {amplitude}\nepsilon = {epsilon}\nomega = {omega}"
                );
            }
            FlowSpec::Gridded { path } => {
                let _ = writeln!(s, "kind = gridded\npath = {}", path.display());
            }
        }
        let _ = writeln!(s, "\n[splash]");
        let _ = writeln!(s, "t0_hours = {}", self.splash_t0_hours);
        for p in &self.splash_polygons {
            let _ = writeln!(s, "polygon = {}", polygon_to_string(p));
        }
        let _ = writeln!(s, "\n[schedule]");
        for d in &self.schedule {
            let _ = writeln!(
                s,
                "day = {} {} {} {}",
                d.day_index, d.window_start_h, d.window_end_h, d.n_agents
            );
        }
        let _ = writeln!(s, "\n[agents]");
        let _ = writeln!(s, "speed_kmh = {}", self.agent_speed_kmh);
        let _ = writeln!(s, "\n[controller]");
        let _ = writeln!(s, "kind = {}", self.controller.name());
        let _ = writeln!(s, "sigma_km = {}", self.sigma_km);
        let _ = writeln!(s, "beta_mdsmc = {}", self.beta_mdsmc);
        let _ = writeln!(s, "beta_dsmc = {}", self.beta_dsmc);
        let _ = writeln!(s, "lawnmower_spacing_km = {}", self.lawnmower_spacing_km);
        for p in &self.sweep_polygons {
            let _ = writeln!(s, "sweep_polygon = {}", polygon_to_string(p));
        }
        let _ = writeln!(s, "\n[detection]");
        let _ = writeln!(s, "radius_km = {}", self.detection_radius_km);
        let _ = writeln!(s, "mean_time_s = {}", self.detection_mean_time_s);
        let _ = writeln!(s, "\n[transport]");
        let _ = writeln!(s, "n_tracers = {}", self.n_tracers);
        let _ = writeln!(s, "bandwidth_km = {}", self.bandwidth_km);
        let _ = writeln!(s, "\n[grid]");
        let _ = writeln!(s, "nx = {}", self.grid_nx);
        let _ = writeln!(s, "ny = {}", self.grid_ny);
        let _ = writeln!(s, "modes = {}", self.basis_modes);
        let _ = writeln!(s, "\n[ensemble]");
        let _ = writeln!(s, "n_targets = {}", self.n_targets);
        let _ = writeln!(s, "n_runs = {}", self.n_runs);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "start_delay_days = {}", self.start_delay_days);
        s
    }

    /// Structured summary of the parameters (for `summary.json`).
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "domain": {
                "x_min": self.domain.x_min,
                "x_max": self.domain.x_max,
                "y_min": self.domain.y_min,
                "y_max": self.domain.y_max,
            },
            "controller": self.controller.name(),
            "schedule_days": self.schedule.len(),
            "agent_speed_kmh": self.agent_speed_kmh,
            "sigma_km": self.sigma_km,
            "detection_radius_km": self.detection_radius_km,
            "detection_mean_time_s": self.detection_mean_time_s,
            "n_tracers": self.n_tracers,
            "n_targets": self.n_targets,
            "n_runs": self.n_runs,
            "seed": self.seed,
            "start_delay_days": self.start_delay_days,
            "grid": [self.grid_nx, self.grid_ny],
            "modes": self.basis_modes,
        })
    }
}

fn polygon_to_string(p: &Polygon) -> String {
    p.vertices()
        .iter()
        .map(|v| format!("{} {}", v.x, v.y))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Clone, Debug)]
struct Entry {
    section: String,
    key: String,
    value: String,
    line: usize,
}

const SECTIONS: &[&str] = &[
    "domain",
    "flow",
    "splash",
    "schedule",
    "agents",
    "controller",
    "detection",
    "transport",
    "grid",
    "ensemble",
];

/// Keys that may appear multiple times.
const REPEATABLE: &[(&str, &str)] = &[
    ("splash", "polygon"),
    ("schedule", "day"),
    ("controller", "sweep_polygon"),
];

const KNOWN_KEYS: &[(&str, &str)] = &[
    ("domain", "x_min"),
    ("domain", "x_max"),
    ("domain", "y_min"),
    ("domain", "y_max"),
    ("flow", "kind"),
    ("flow", "u"),
    ("flow", "v"),
    ("flow", "omega"),
    ("flow", "rate"),
    ("flow", "center_x"),
    ("flow", "center_y"),
    ("flow", "amplitude"),
    ("flow", "epsilon"),
    ("flow", "path"),
    ("splash", "t0_hours"),
    ("splash", "polygon"),
    ("schedule", "day"),
    ("agents", "speed_kmh"),
    ("controller", "kind"),
    ("controller", "sigma_km"),
    ("controller", "beta_mdsmc"),
    ("controller", "beta_dsmc"),
    ("controller", "lawnmower_spacing_km"),
    ("controller", "sweep_polygon"),
    ("detection", "radius_km"),
    ("detection", "mean_time_s"),
    ("transport", "n_tracers"),
    ("transport", "bandwidth_km"),
    ("grid", "nx"),
    ("grid", "ny"),
    ("grid", "modes"),
    ("ensemble", "n_targets"),
    ("ensemble", "n_runs"),
    ("ensemble", "seed"),
    ("ensemble", "start_delay_days"),
];

fn tokenize(text: &str) -> Result<Vec<Entry>> {
    let mut section = String::new();
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| Error::Parse {
                line,
                message: format!("unterminated section header `{content}`"),
            })?;
            if !SECTIONS.contains(&name) {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown section `[{name}]`"),
                });
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
            line,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if section.is_empty() {
            return Err(Error::Parse {
                line,
                message: format!("key `{key}` appears before any [section]"),
            });
        }
        if !KNOWN_KEYS
            .iter()
            .any(|(s, k)| *s == section && *k == key)
        {
            return Err(Error::Parse {
                line,
                message: format!("unknown key `{key}` in section [{section}]"),
            });
        }
        if !REPEATABLE
            .iter()
            .any(|(s, k)| *s == section && *k == key)
        {
            if let Some(prev) = entries
                .iter()
                .find(|e: &&Entry| e.section == section && e.key == key)
            {
                return Err(Error::Parse {
                    line,
                    message: format!(
                        "duplicate key `{key}` in [{section}] (first at line {})",
                        prev.line
                    ),
                });
            }
        }
        entries.push(Entry {
            section: section.clone(),
            key,
            value,
            line,
        });
    }
    Ok(entries)
}

fn apply_override(entries: &mut Vec<Entry>, key_path: &str, value: &str) -> Result<()> {
    let (section, key) = key_path.split_once('.').ok_or_else(|| {
        Error::config(format!(
            "override `{key_path}` must have the form section.key"
        ))
    })?;
    if !KNOWN_KEYS.iter().any(|(s, k)| *s == section && *k == key) {
        return Err(Error::config(format!(
            "override targets unknown key `{key_path}`"
        )));
    }
    if REPEATABLE.iter().any(|(s, k)| *s == section && *k == key) {
        return Err(Error::config(format!(
            "key `{key_path}` is repeatable and cannot be overridden with --set"
        )));
    }
    if let Some(e) = entries
        .iter_mut()
        .find(|e| e.section == section && e.key == key)
    {
        e.value = value.to_string();
    } else {
        entries.push(Entry {
            section: section.to_string(),
            key: key.to_string(),
            value: value.to_string(),
            line: 0,
        });
    }
    Ok(())
}

fn parse_num<T: std::str::FromStr>(e: &Entry, what: &str) -> Result<T> {
    e.value.parse().map_err(|_| Error::Parse {
        line: e.line,
        message: format!("bad {what} value `{}`", e.value),
    })
}

/// `x y, x y, ...` vertex list.
fn parse_polygon(e: &Entry) -> Result<Polygon> {
    let mut verts = Vec::new();
    for pair in e.value.split(',') {
        let mut nums = pair.split_whitespace();
        let x: f64 = nums
            .next()
            .ok_or(())
            .and_then(|s| s.parse().map_err(|_| ()))
            .map_err(|_| Error::Parse {
                line: e.line,
                message: format!("bad polygon vertex `{pair}`"),
            })?;
        let y: f64 = nums
            .next()
            .ok_or(())
            .and_then(|s| s.parse().map_err(|_| ()))
            .map_err(|_| Error::Parse {
                line: e.line,
                message: format!("bad polygon vertex `{pair}`"),
            })?;
        if nums.next().is_some() {
            return Err(Error::Parse {
                line: e.line,
                message: format!("polygon vertex `{pair}` has extra fields"),
            });
        }
        verts.push(Vec2::new(x, y));
    }
    Polygon::new(verts).map_err(|err| Error::Parse {
        line: e.line,
        message: err.to_string(),
    })
}

/// Accepts `HH:MM` or decimal hours.
fn parse_hours(s: &str, line: usize) -> Result<f64> {
    if let Some((h, m)) = s.split_once(':') {
        let h: f64 = h.parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad hour in `{s}`"),
        })?;
        let m: f64 = m.parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad minutes in `{s}`"),
        })?;
        Ok(h + m / 60.0)
    } else {
        s.parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad hours value `{s}`"),
        })
    }
}

/// `day = <index> <start> <end> <n_agents>`.
fn parse_day(e: &Entry) -> Result<SearchDay> {
    let parts: Vec<&str> = e.value.split_whitespace().collect();
    if parts.len() != 4 {
        return Err(Error::Parse {
            line: e.line,
            message: format!(
                "day entry needs `<index> <start> <end> <agents>`, got `{}`",
                e.value
            ),
        });
    }
    Ok(SearchDay {
        day_index: parts[0].parse().map_err(|_| Error::Parse {
            line: e.line,
            message: format!("bad day index `{}`", parts[0]),
        })?,
        window_start_h: parse_hours(parts[1], e.line)?,
        window_end_h: parse_hours(parts[2], e.line)?,
        n_agents: parts[3].parse().map_err(|_| Error::Parse {
            line: e.line,
            message: format!("bad agent count `{}`", parts[3]),
        })?,
    })
}

fn build_config(entries: &[Entry]) -> Result<ScenarioConfig> {
    let get = |section: &str, key: &str| -> Option<&Entry> {
        entries
            .iter()
            .find(|e| e.section == section && e.key == key)
    };
    let require = |section: &str, key: &str| -> Result<&Entry> {
        get(section, key).ok_or_else(|| {
            Error::config(format!("missing required key `{key}` in [{section}]"))
        })
    };

    let domain = Domain::new(
        parse_num(require("domain", "x_min")?, "x_min")?,
        parse_num(require("domain", "x_max")?, "x_max")?,
        parse_num(require("domain", "y_min")?, "y_min")?,
        parse_num(require("domain", "y_max")?, "y_max")?,
    )?;

    let flow = match get("flow", "kind").map(|e| e.value.as_str()) {
        None => FlowSpec::Uniform { u: 0.0, v: 0.0 },
        Some("uniform") => FlowSpec::Uniform {
            u: get("flow", "u").map(|e| parse_num(e, "u")).transpose()?.unwrap_or(0.0),
            v: get("flow", "v").map(|e| parse_num(e, "v")).transpose()?.unwrap_or(0.0),
        },
        Some("rotation") => FlowSpec::Rotation {
            omega: parse_num(require("flow", "omega")?, "omega")?,
            cx: get("flow", "center_x").map(|e| parse_num(e, "center_x")).transpose()?.unwrap_or_else(|| domain.center().x),
            cy: get("flow", "center_y").map(|e| parse_num(e, "center_y")).transpose()?.unwrap_or_else(|| domain.center().y),
        },
        Some("saddle") => FlowSpec::Saddle {
            rate: parse_num(require("flow", "rate")?, "rate")?,
            cx: get("flow", "center_x").map(|e| parse_num(e, "center_x")).transpose()?.unwrap_or_else(|| domain.center().x),
            cy: get("flow", "center_y").map(|e| parse_num(e, "center_y")).transpose()?.unwrap_or_else(|| domain.center().y),
        },
        Some("double_gyre") => FlowSpec::DoubleGyre {
            amplitude: parse_num(require("flow", "amplitude")?, "amplitude")?,
            epsilon: get("flow", "epsilon").map(|e| parse_num(e, "epsilon")).transpose()?.unwrap_or(0.25),
            omega: get("flow", "omega").map(|e| parse_num(e, "omega")).transpose()?.unwrap_or(std::f64::consts::PI / 12.0),
        },
        Some("gridded") => FlowSpec::Gridded {
            path: PathBuf::from(&require("flow", "path")?.value),
        },
        Some(other) => {
            let line = get("flow", "kind").map(|e| e.line).unwrap_or(0);
            return Err(Error::Parse {
                line,
                message: format!("unknown flow kind `{other}`"),
            });
        }
    };

    let mut splash_polygons = Vec::new();
    for e in entries.iter().filter(|e| e.section == "splash" && e.key == "polygon") {
        splash_polygons.push(parse_polygon(e)?);
    }

    let mut schedule = Vec::new();
    for e in entries.iter().filter(|e| e.section == "schedule" && e.key == "day") {
        schedule.push(parse_day(e)?);
    }

    let mut sweep_polygons = Vec::new();
    for e in entries
        .iter()
        .filter(|e| e.section == "controller" && e.key == "sweep_polygon")
    {
        sweep_polygons.push(parse_polygon(e)?);
    }

    let controller = match get("controller", "kind") {
        None => ControllerKind::Mdsmc,
        Some(e) => ControllerKind::parse(&e.value).ok_or_else(|| Error::Parse {
            line: e.line,
            message: format!("unknown controller kind `{}`", e.value),
        })?,
    };

    macro_rules! opt_num {
        ($sec:literal, $key:literal, $default:expr) => {
            match get($sec, $key) {
                Some(e) => parse_num(e, $key)?,
                None => $default,
            }
        };
    }

    let config = ScenarioConfig {
        domain,
        flow,
        splash_polygons,
        splash_t0_hours: opt_num!("splash", "t0_hours", 0.0),
        schedule,
        agent_speed_kmh: opt_num!("agents", "speed_kmh", 380.0),
        controller,
        sigma_km: opt_num!("controller", "sigma_km", 3.0),
        beta_mdsmc: opt_num!("controller", "beta_mdsmc", -0.5),
        beta_dsmc: opt_num!("controller", "beta_dsmc", -1.5),
        lawnmower_spacing_km: opt_num!("controller", "lawnmower_spacing_km", 3.0),
        sweep_polygons,
        detection_radius_km: opt_num!("detection", "radius_km", 1.5),
        detection_mean_time_s: opt_num!("detection", "mean_time_s", 2.0),
        n_tracers: opt_num!("transport", "n_tracers", 10_000),
        bandwidth_km: opt_num!("transport", "bandwidth_km", 3.0),
        grid_nx: opt_num!("grid", "nx", 128),
        grid_ny: opt_num!("grid", "ny", 128),
        basis_modes: opt_num!("grid", "modes", 32),
        n_targets: opt_num!("ensemble", "n_targets", 1000),
        n_runs: opt_num!("ensemble", "n_runs", 100),
        seed: opt_num!("ensemble", "seed", 0),
        start_delay_days: opt_num!("ensemble", "start_delay_days", 0),
    };
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
[domain]
x_min = 0
x_max = 100
y_min = 0
y_max = 100

[splash]
polygon = 20 20, 40 20, 40 40, 20 40

[schedule]
day = 0 14:00 17:00 10
";

    #[test]
    fn minimal_config_fills_defaults() {
        let c = ScenarioConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.agent_speed_kmh, 380.0);
        assert_eq!(c.sigma_km, 3.0);
        assert_eq!(c.detection_radius_km, 1.5);
        assert_eq!(c.detection_mean_time_s, 2.0);
        assert_eq!(c.beta_mdsmc, -0.5);
        assert_eq!(c.beta_dsmc, -1.5);
        assert_eq!(c.controller, ControllerKind::Mdsmc);
        assert_eq!(c.grid_nx, 128);
        assert_eq!(c.basis_modes, 32);
        assert_eq!(c.schedule.len(), 1);
        assert_eq!(c.schedule[0].window_start_h, 14.0);
        assert_eq!(c.window(&c.schedule[0], 0), (14.0, 17.0));
    }

    #[test]
    fn unknown_key_reports_line() {
        let bad = MINIMAL.replace("[schedule]", "[agents]\nspeeed = 7\n\n[schedule]");
        let err = ScenarioConfig::parse(&bad).unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert!(message.contains("speeed"), "{message}");
                assert_eq!(line, 11);
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn roundtrip_is_identity() {
        let text = format!(
            "{MINIMAL}
[flow]
kind = double_gyre
amplitude = 95.5
epsilon = 0.3
omega = 0.26

[controller]
kind = dsmc
sigma_km = 2.5

[ensemble]
n_targets = 200
n_runs = 4
seed = 11
"
        );
        let c1 = ScenarioConfig::parse(&text).unwrap();
        let c2 = ScenarioConfig::parse(&c1.serialize()).unwrap();
        assert_eq!(c1, c2);
        let c3 = ScenarioConfig::parse(&c2.serialize()).unwrap();
        assert_eq!(c2, c3);
    }

    #[test]
    fn overrides_replace_scalars() {
        let c = ScenarioConfig::parse_with_overrides(
            MINIMAL,
            &[
                ("ensemble.seed".to_string(), "99".to_string()),
                ("controller.kind".to_string(), "dsmc".to_string()),
            ],
        )
        .unwrap();
        assert_eq!(c.seed, 99);
        assert_eq!(c.controller, ControllerKind::Dsmc);
        // repeatable keys are rejected
        assert!(ScenarioConfig::parse_with_overrides(
            MINIMAL,
            &[("schedule.day".to_string(), "1 2 3 4".to_string())]
        )
        .is_err());
    }

    #[test]
    fn overlapping_windows_rejected() {
        let bad = MINIMAL.replace(
            "day = 0 14:00 17:00 10",
            "day = 0 14:00 17:00 10\nday = 0 16:00 18:00 10",
        );
        assert!(ScenarioConfig::parse(&bad).is_err());
    }

    #[test]
    fn lawnmower_reported_needs_polygons() {
        let bad = format!("{MINIMAL}\n[controller]\nkind = lawnmower_reported\n");
        assert!(ScenarioConfig::parse(&bad).is_err());
        let good = format!(
            "{MINIMAL}\n[controller]\nkind = lawnmower_reported\nsweep_polygon = 10 10, 60 10, 60 60, 10 60\n"
        );
        assert!(ScenarioConfig::parse(&good).is_ok());
    }

    #[test]
    fn splash_outside_domain_rejected() {
        let bad = MINIMAL.replace("40 40", "400 40");
        assert!(ScenarioConfig::parse(&bad).is_err());
    }

    #[test]
    fn aliasing_guard() {
        let bad = format!("{MINIMAL}\n[grid]\nnx = 64\nny = 64\nmodes = 32\n");
        assert!(ScenarioConfig::parse(&bad).is_err());
    }
}
