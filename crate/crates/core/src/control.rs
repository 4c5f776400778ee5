//! Agent steering: the spectral gradient controller shared by mDSMC and DSMC,
//! and the lawnmower (boustrophedon) baseline.

pub use crate::geom::convex_hull;

use crate::domain::Domain;
use crate::geom::{Polygon, Vec2};
use crate::search_theory::MismatchField;
use crate::spectral::SpectralBasis;
use crate::{Error, Result};

/// Gradient magnitude below which an agent keeps its previous heading.
const GRAD_EPS: f64 = 1e-12;

/// One search agent: position (km), constant speed (km/h), unit heading.
#[derive(Clone, Copy, Debug)]
pub struct AgentState {
    pub position: Vec2,
    pub speed_kmh: f64,
    pub heading: Vec2,
    pub active: bool,
}

impl AgentState {
    pub fn new(position: Vec2, speed_kmh: f64, heading: Vec2) -> Self {
        let heading = heading.normalized(GRAD_EPS).unwrap_or(Vec2::new(1.0, 0.0));
        AgentState {
            position,
            speed_kmh,
            heading,
            active: true,
        }
    }
}

/// Places `n` agents evenly along the domain boundary edge nearest to
/// `toward` (the distribution centroid), inset by `inset_km` so the potential
/// gradient (whose normal component vanishes exactly on the boundary) can
/// pull them inward. Stands in for transit from an airbase outside the
/// search domain.
pub fn init_agents_on_nearest_edge(
    domain: Domain,
    toward: Vec2,
    n: usize,
    speed_kmh: f64,
    inset_km: f64,
) -> Vec<AgentState> {
    let c = domain.clamp(toward);
    let dists = [
        c.y - domain.y_min, // south edge
        domain.y_max - c.y, // north edge
        c.x - domain.x_min, // west edge
        domain.x_max - c.x, // east edge
    ];
    let edge = dists
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    let inset = inset_km
        .min(0.25 * domain.width())
        .min(0.25 * domain.height());
    (0..n)
        .map(|i| {
            let frac = (i as f64 + 0.5) / n as f64;
            let position = match edge {
                0 => Vec2::new(domain.x_min + frac * domain.width(), domain.y_min + inset),
                1 => Vec2::new(domain.x_min + frac * domain.width(), domain.y_max - inset),
                2 => Vec2::new(domain.x_min + inset, domain.y_min + frac * domain.height()),
                _ => Vec2::new(domain.x_max - inset, domain.y_min + frac * domain.height()),
            };
            let heading = (toward - position)
                .normalized(GRAD_EPS)
                .unwrap_or(Vec2::new(1.0, 0.0));
            AgentState::new(position, speed_kmh, heading)
        })
        .collect()
}

/// Diagnostics from one spectral control step.
#[derive(Clone, Copy, Debug)]
pub struct SmcStepInfo {
    /// Sobolev norm of the mismatch before the step.
    pub phi: f64,
}

/// One control step of the spectral gradient law: project the mismatch onto
/// the basis, steer every active agent up the potential gradient at constant
/// speed, reflect off the domain boundary.
pub fn smc_step(
    agents: &mut [AgentState],
    mismatch: &MismatchField,
    basis: &SpectralBasis,
    dt_hours: f64,
) -> Result<SmcStepInfo> {
    if dt_hours <= 0.0 {
        return Err(Error::config("control step must be positive"));
    }
    let coeffs = basis.transform(&mismatch.field)?;
    let phi = basis.sobolev_norm(&coeffs);
    for agent in agents.iter_mut() {
        if !agent.active {
            continue;
        }
        let sample = basis.synthesize_potential(&coeffs, agent.position);
        if let Some(dir) = sample.gradient.normalized(GRAD_EPS) {
            agent.heading = dir;
        }
        let step = agent.heading * (agent.speed_kmh * dt_hours);
        let (pos, heading) = reflect_into_domain(basis.domain, agent.position + step, agent.heading);
        agent.position = pos;
        agent.heading = heading;
    }
    Ok(SmcStepInfo { phi })
}

/// Reflects a position back into the domain, flipping the matching heading
/// component for every bounced axis.
pub fn reflect_into_domain(domain: Domain, mut p: Vec2, mut heading: Vec2) -> (Vec2, Vec2) {
    for _ in 0..4 {
        let mut bounced = false;
        if p.x < domain.x_min {
            p.x = 2.0 * domain.x_min - p.x;
            heading.x = -heading.x;
            bounced = true;
        } else if p.x > domain.x_max {
            p.x = 2.0 * domain.x_max - p.x;
            heading.x = -heading.x;
            bounced = true;
        }
        if p.y < domain.y_min {
            p.y = 2.0 * domain.y_min - p.y;
            heading.y = -heading.y;
            bounced = true;
        } else if p.y > domain.y_max {
            p.y = 2.0 * domain.y_max - p.y;
            heading.y = -heading.y;
            bounced = true;
        }
        if !bounced {
            return (p, heading);
        }
    }
    // pathological step far outside: give up and clamp
    (domain.clamp(p), heading)
}

/// Serpentine waypoint routes, one list per agent, with per-agent progress.
#[derive(Clone, Debug)]
pub struct WaypointPlan {
    groups: Vec<Vec<Vec2>>,
    cursor: Vec<usize>,
    /// True when an agent had no track to follow this step (empty plan).
    pub holding: bool,
}

impl WaypointPlan {
    pub fn groups(&self) -> &[Vec<Vec2>] {
        &self.groups
    }

    /// Start position for each agent: the first waypoint of its group.
    pub fn start_positions(&self) -> Vec<Option<Vec2>> {
        self.groups.iter().map(|g| g.first().copied()).collect()
    }

    /// Total polyline length of one group, including the closing return leg.
    pub fn group_length(&self, idx: usize) -> f64 {
        let g = &self.groups[idx];
        if g.len() < 2 {
            return 0.0;
        }
        let mut len = 0.0;
        for w in g.windows(2) {
            len += w[0].dist(w[1]);
        }
        len
    }
}

/// Builds parallel sweep tracks over a convex polygon, serpentine-connected
/// and split into `n_agents` contiguous groups of near-equal length.
///
/// Tracks run perpendicular to the polygon's minimal width direction, offset
/// by `spacing`, the first one `spacing/2` inside. A polygon thinner than
/// `spacing` degrades to a single center track; a degenerate (collinear) hull
/// to a single track along the segment.
pub fn lawnmower_plan(region: &Polygon, n_agents: usize, spacing_km: f64) -> Result<WaypointPlan> {
    if n_agents == 0 {
        return Err(Error::config("lawnmower plan needs at least one agent"));
    }
    if spacing_km <= 0.0 {
        return Err(Error::config("lawnmower spacing must be positive"));
    }
    let verts = region.vertices();
    let tracks: Vec<(Vec2, Vec2)> = if verts.len() < 3 || region.area() < 1e-9 {
        // degenerate hull: one track along the extent of the points
        let (lo, hi) = region.bounding_box();
        vec![(lo, hi)]
    } else {
        if !region.is_convex() {
            return Err(Error::config("lawnmower region must be convex"));
        }
        build_tracks(region, spacing_km)?
    };

    // serpentine orientation
    let oriented: Vec<(Vec2, Vec2)> = tracks
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| if k % 2 == 0 { (a, b) } else { (b, a) })
        .collect();

    let groups: Vec<Vec<Vec2>> = if oriented.len() >= n_agents {
        partition_tracks(&oriented, n_agents)
    } else {
        // fewer tracks than agents: reuse tracks round-robin
        (0..n_agents)
            .map(|i| {
                let (a, b) = oriented[i % oriented.len()];
                vec![a, b]
            })
            .collect()
    };

    let groups: Vec<Vec<Vec2>> = groups
        .into_iter()
        .map(|mut g| {
            g.dedup_by(|a, b| a.dist(*b) < 1e-9);
            g
        })
        .collect();
    let n = groups.len();
    Ok(WaypointPlan {
        groups,
        cursor: vec![0; n],
        holding: false,
    })
}

fn build_tracks(region: &Polygon, spacing: f64) -> Result<Vec<(Vec2, Vec2)>> {
    let verts = region.vertices();
    let n = verts.len();
    // minimal width over edge directions (attained at an edge for convex polygons)
    let mut best: Option<(Vec2, Vec2, f64)> = None; // (anchor, inward normal, width)
    for i in 0..n {
        let a = verts[i];
        let b = verts[(i + 1) % n];
        let dir = match (b - a).normalized(1e-12) {
            Some(d) => d,
            None => continue,
        };
        let normal = Vec2::new(-dir.y, dir.x);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in verts {
            let d = (*v - a).dot(normal);
            lo = lo.min(d);
            hi = hi.max(d);
        }
        let width = hi - lo;
        // anchor on the polygon's lower supporting line for this direction
        let anchor = a + normal * lo;
        if best.map_or(true, |(_, _, w)| width < w) {
            best = Some((anchor, normal, width));
        }
    }
    let (anchor, normal, width) =
        best.ok_or_else(|| Error::config("cannot orient lawnmower tracks"))?;
    let dir = Vec2::new(normal.y, -normal.x);

    let offsets: Vec<f64> = if width <= spacing {
        vec![width / 2.0]
    } else {
        let mut v = Vec::new();
        let mut off = spacing / 2.0;
        while off < width {
            v.push(off);
            off += spacing;
        }
        v
    };

    let mut tracks = Vec::with_capacity(offsets.len());
    for off in offsets {
        let origin = anchor + normal * off;
        if let Some((t0, t1)) = clip_line_to_convex(region, origin, dir) {
            if t1 - t0 > 1e-9 {
                tracks.push((origin + dir * t0, origin + dir * t1));
            }
        }
    }
    if tracks.is_empty() {
        return Err(Error::config("lawnmower produced no tracks"));
    }
    Ok(tracks)
}

/// Intersects the line `origin + t·dir` with a convex polygon, returning the
/// parameter interval inside it.
fn clip_line_to_convex(poly: &Polygon, origin: Vec2, dir: Vec2) -> Option<(f64, f64)> {
    let verts = poly.vertices();
    let n = verts.len();
    let ccw = poly.signed_area() > 0.0;
    let mut t_lo = f64::NEG_INFINITY;
    let mut t_hi = f64::INFINITY;
    for i in 0..n {
        let a = verts[i];
        let b = verts[(i + 1) % n];
        let edge = b - a;
        // inward normal
        let normal = if ccw {
            Vec2::new(-edge.y, edge.x)
        } else {
            Vec2::new(edge.y, -edge.x)
        };
        let denom = dir.dot(normal);
        let num = (a - origin).dot(normal);
        if denom.abs() < 1e-12 {
            if num > 0.0 {
                return None; // parallel and outside
            }
            continue;
        }
        let t = num / denom;
        if denom > 0.0 {
            t_lo = t_lo.max(t);
        } else {
            t_hi = t_hi.min(t);
        }
    }
    (t_lo < t_hi).then_some((t_lo, t_hi))
}

/// Contiguous split of serpentine tracks into `n` groups of near-equal total
/// track length.
fn partition_tracks(tracks: &[(Vec2, Vec2)], n: usize) -> Vec<Vec<Vec2>> {
    let total: f64 = tracks.iter().map(|(a, b)| a.dist(*b)).sum();
    let mut groups = vec![Vec::new(); n];
    let mut acc = 0.0;
    let mut g = 0;
    for &(a, b) in tracks {
        let len = a.dist(b);
        if g + 1 < n && acc + 0.5 * len > total * (g + 1) as f64 / n as f64 {
            g += 1;
        }
        groups[g].push(a);
        groups[g].push(b);
        acc += len;
    }
    groups
}

/// Advances each agent along its waypoint route at constant speed, turning
/// instantly at waypoints, carrying leftover distance into the next leg, and
/// looping over its track group when exhausted. Agents without a route hold
/// position and the plan is flagged.
pub fn follow_waypoints(
    agents: &mut [AgentState],
    plan: &mut WaypointPlan,
    dt_hours: f64,
) -> Result<()> {
    if dt_hours <= 0.0 {
        return Err(Error::config("control step must be positive"));
    }
    for (i, agent) in agents.iter_mut().enumerate() {
        if !agent.active {
            continue;
        }
        let group = match plan.groups.get(i) {
            Some(g) if !g.is_empty() => g,
            _ => {
                plan.holding = true;
                continue;
            }
        };
        if group.len() == 1 {
            // single waypoint: travel to it, then hold
            let target = group[0];
            let d = agent.position.dist(target);
            let step = agent.speed_kmh * dt_hours;
            if d <= step {
                agent.position = target;
            } else {
                agent.heading = (target - agent.position).normalized(GRAD_EPS).unwrap();
                agent.position += agent.heading * step;
            }
            continue;
        }
        let mut remaining = agent.speed_kmh * dt_hours;
        let mut guard = 0;
        while remaining > 1e-12 {
            guard += 1;
            if guard > 4 * group.len() + 8 {
                break; // degenerate route shorter than one step
            }
            let target = group[plan.cursor[i] % group.len()];
            let d = agent.position.dist(target);
            if d <= remaining {
                agent.position = target;
                remaining -= d;
                plan.cursor[i] += 1;
            } else {
                agent.heading = (target - agent.position).normalized(GRAD_EPS).unwrap();
                agent.position += agent.heading * remaining;
                remaining = 0.0;
            }
        }
    }
    Ok(())
}
