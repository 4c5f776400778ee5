//! SVG renders of prior run artifacts: success curves, agent trajectories,
//! scalar fields, and hypergraph rasters.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};

const W: f64 = 900.0;
const H: f64 = 600.0;
const MARGIN: f64 = 50.0;

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let sx = (W - 2.0 * MARGIN) / (self.x_max - self.x_min).max(1e-12);
        let sy = (H - 2.0 * MARGIN) / (self.y_max - self.y_min).max(1e-12);
        (
            MARGIN + (x - self.x_min) * sx,
            H - MARGIN - (y - self.y_min) * sy,
        )
    }
}

fn svg_header(out: &mut impl Write) -> std::io::Result<()> {
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    )?;
    writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#)
}

fn svg_axes(out: &mut impl Write, f: &Frame, x_label: &str, y_label: &str) -> std::io::Result<()> {
    writeln!(
        out,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    )?;
    writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="14" text-anchor="middle">{x_label} [{:.1} .. {:.1}]</text>"#,
        W / 2.0,
        H - 12.0,
        f.x_min,
        f.x_max
    )?;
    writeln!(
        out,
        r#"<text x="16" y="{}" font-size="14" text-anchor="middle" transform="rotate(-90 16 {})">{y_label} [{:.2} .. {:.2}]</text>"#,
        H / 2.0,
        H / 2.0,
        f.y_min,
        f.y_max
    )
}

const PALETTE: &[&str] = &[
    "#1b6ca8", "#c23b22", "#2e8540", "#8a5acf", "#d98c21", "#147d81", "#a2336b", "#5a5a5a",
];

fn read_csv_columns(path: &Path, expect_header: &str) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if !header.starts_with(expect_header) {
        bail!(
            "{}: expected header starting with `{expect_header}`, got `{header}`",
            path.display()
        );
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Result<Vec<f64>, _> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .take(3)
            .collect();
        rows.push(vals.with_context(|| format!("{}: bad row {}", path.display(), i + 2))?);
    }
    Ok(rows)
}

/// Detected-fraction curves, one polyline per run (or per offset for the
/// delayed comparison CSV).
pub fn plot_curve(input: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(input)?;
    let header_ok = text.starts_with("run_id,t_hours,detected_fraction")
        || text.starts_with("offset_days,t_hours,mean_detected_fraction");
    if !header_ok {
        bail!("{}: not a success-curve CSV", input.display());
    }
    let mut series: BTreeMap<i64, Vec<(f64, f64)>> = BTreeMap::new();
    let mut t_range = (f64::INFINITY, f64::NEG_INFINITY);
    for line in text.lines().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let id: i64 = parts.next().unwrap_or("0").trim().parse()?;
        let t: f64 = parts.next().unwrap_or("0").trim().parse()?;
        let f: f64 = parts.next().unwrap_or("0").trim().parse()?;
        series.entry(id).or_default().push((t, f));
        t_range.0 = t_range.0.min(t);
        t_range.1 = t_range.1.max(t);
    }
    if series.is_empty() {
        bail!("{}: no rows", input.display());
    }
    let frame = Frame {
        x_min: t_range.0,
        x_max: t_range.1,
        y_min: 0.0,
        y_max: 1.0,
    };
    write_svg(out, |w| {
        svg_header(w)?;
        svg_axes(w, &frame, "t_hours", "detected fraction")?;
        for (i, (_, pts)) in series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let path: Vec<String> = pts
                .iter()
                .map(|&(t, f)| {
                    let (x, y) = frame.map(t, f);
                    format!("{x:.1},{y:.1}")
                })
                .collect();
            writeln!(
                w,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.1" opacity="0.8"/>"#,
                path.join(" ")
            )?;
        }
        writeln!(w, "</svg>")
    })
}

/// Agent paths from a trajectory NDJSON log.
pub fn plot_trajectories(input: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(input)?;
    let mut series: BTreeMap<i64, Vec<(f64, f64)>> = BTreeMap::new();
    let mut frame = Frame {
        x_min: f64::INFINITY,
        x_max: f64::NEG_INFINITY,
        y_min: f64::INFINITY,
        y_max: f64::NEG_INFINITY,
    };
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value = serde_json::from_str(line)
            .with_context(|| format!("{}: bad NDJSON line {}", input.display(), i + 1))?;
        let id = v["agent_id"].as_i64().unwrap_or(0);
        let x = v["x_km"].as_f64().context("x_km missing")?;
        let y = v["y_km"].as_f64().context("y_km missing")?;
        frame.x_min = frame.x_min.min(x);
        frame.x_max = frame.x_max.max(x);
        frame.y_min = frame.y_min.min(y);
        frame.y_max = frame.y_max.max(y);
        series.entry(id).or_default().push((x, y));
    }
    if series.is_empty() {
        bail!("{}: no trajectory records", input.display());
    }
    write_svg(out, |w| {
        svg_header(w)?;
        svg_axes(w, &frame, "x_km", "y_km")?;
        for (i, (_, pts)) in series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let path: Vec<String> = pts
                .iter()
                .map(|&(x, y)| {
                    let (px, py) = frame.map(x, y);
                    format!("{px:.1},{py:.1}")
                })
                .collect();
            writeln!(
                w,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="0.9" opacity="0.9"/>"#,
                path.join(" ")
            )?;
        }
        writeln!(w, "</svg>")
    })
}

/// Five-stop color ramp from dark blue to yellow.
fn ramp(v: f64) -> String {
    const STOPS: [(f64, [u8; 3]); 5] = [
        (0.0, [13, 8, 135]),
        (0.25, [126, 3, 168]),
        (0.5, [204, 71, 120]),
        (0.75, [248, 149, 64]),
        (1.0, [240, 249, 33]),
    ];
    let v = v.clamp(0.0, 1.0);
    for w in STOPS.windows(2) {
        let (a, ca) = w[0];
        let (b, cb) = w[1];
        if v <= b {
            let f = (v - a) / (b - a);
            let mix = |x: u8, y: u8| (x as f64 + f * (y as f64 - x as f64)).round() as u8;
            return format!(
                "#{:02x}{:02x}{:02x}",
                mix(ca[0], cb[0]),
                mix(ca[1], cb[1]),
                mix(ca[2], cb[2])
            );
        }
    }
    "#f0f921".into()
}

/// Heatmap of an `x_km,y_km,value` field CSV.
pub fn plot_field(input: &Path, out: &Path) -> Result<()> {
    let rows = read_csv_columns(input, "x_km,y_km,value")?;
    raster(out, &rows, |v, lo, hi| {
        ramp(if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
    })
}

/// Blue/red raster of a hypergraph CSV (`det_value` sign and threshold are
/// already folded into the label column, so color on the third column's
/// class by re-deriving it from det and the label string).
pub fn plot_hypergraph(input: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(input)?;
    if !text.starts_with("x_km,y_km,det_value,label") {
        bail!("{}: not a hypergraph CSV", input.display());
    }
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        let x: f64 = parts[0].trim().parse()?;
        let y: f64 = parts[1].trim().parse()?;
        let hyper = parts
            .get(3)
            .map(|s| s.trim() == "mesohyperbolic")
            .unwrap_or(false);
        rows.push(vec![x, y, if hyper { 1.0 } else { 0.0 }]);
    }
    raster(out, &rows, |v, _, _| {
        if v > 0.5 { "#b2182b".into() } else { "#2166ac".into() }
    })
}

fn raster(
    out: &Path,
    rows: &[Vec<f64>],
    color: impl Fn(f64, f64, f64) -> String,
) -> Result<()> {
    if rows.is_empty() {
        bail!("no raster rows");
    }
    let mut xs: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let mut ys: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ys.dedup();
    let (lo, hi) = rows
        .iter()
        .map(|r| r[2])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    let frame = Frame {
        x_min: xs[0],
        x_max: *xs.last().unwrap(),
        y_min: ys[0],
        y_max: *ys.last().unwrap(),
    };
    let cell_w = (W - 2.0 * MARGIN) / xs.len() as f64;
    let cell_h = (H - 2.0 * MARGIN) / ys.len() as f64;
    write_svg(out, |w| {
        svg_header(w)?;
        for r in rows {
            let (px, py) = frame.map(r[0], r[1]);
            writeln!(
                w,
                r#"<rect x="{:.1}" y="{:.1}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                px - cell_w / 2.0,
                py - cell_h / 2.0,
                cell_w + 0.5,
                cell_h + 0.5,
                color(r[2], lo, hi)
            )?;
        }
        svg_axes(w, &frame, "x_km", "y_km")?;
        writeln!(w, "</svg>")
    })
}

fn write_svg(
    out: &Path,
    body: impl FnOnce(&mut std::io::BufWriter<fs::File>) -> std::io::Result<()>,
) -> Result<()> {
    driftsearch_core::io::atomic_write(out, body)
        .with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}
