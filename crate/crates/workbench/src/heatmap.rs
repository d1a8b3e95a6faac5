//! Grid export as CSV or as an SVG heatmap.
//!
//! The SVG draws exactly one `<rect>` per grid node; the color bar is a
//! gradient-filled `<polygon>` so rect counts stay equal to node counts.

use std::fmt::Write as _;
use std::path::Path;

use rft_inverse::{Component, GridStressMap};

use crate::error::Result;
use crate::pipeline::write_file;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Render {
    Csv,
    Svg,
}

impl std::str::FromStr for Render {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Render::Csv),
            "svg" => Ok(Render::Svg),
            other => Err(format!("unknown format {other:?}, expected csv or svg")),
        }
    }
}

/// Writes `map` to `path`. CSV holds both components; SVG shows `component`.
pub fn export_heatmap(
    map: &GridStressMap,
    component: Component,
    path: &Path,
    render: Render,
) -> Result<()> {
    match render {
        Render::Csv => write_file(path, |w| map.write_csv(w)),
        Render::Svg => {
            let svg = render_svg(map, component);
            write_file(path, |w| w.write_all(svg.as_bytes()))
        }
    }
}

/// Viridis anchors at 0, 0.25, 0.5, 0.75, 1.
const PALETTE: [[f64; 3]; 5] = [
    [68.0, 1.0, 84.0],
    [59.0, 82.0, 139.0],
    [33.0, 145.0, 140.0],
    [94.0, 201.0, 98.0],
    [253.0, 231.0, 37.0],
];

fn color(t: f64) -> String {
    if !t.is_finite() {
        return "#808080".into();
    }
    let t = t.clamp(0.0, 1.0) * (PALETTE.len() - 1) as f64;
    let i = (t.floor() as usize).min(PALETTE.len() - 2);
    let f = t - i as f64;
    let c: Vec<u8> = (0..3)
        .map(|k| (PALETTE[i][k] + f * (PALETTE[i + 1][k] - PALETTE[i][k])).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Cell boundaries halfway between nodes, clipped to the axis ends.
fn edges(axis: &[f64]) -> Vec<f64> {
    let n = axis.len();
    let mut e = Vec::with_capacity(n + 1);
    e.push(axis[0]);
    for w in axis.windows(2) {
        e.push(0.5 * (w[0] + w[1]));
    }
    e.push(axis[n - 1]);
    e
}

const PLOT_X: f64 = 80.0;
const PLOT_Y: f64 = 40.0;
const PLOT_W: f64 = 400.0;
const PLOT_H: f64 = 400.0;
const BAR_X: f64 = 510.0;
const BAR_W: f64 = 20.0;

/// SVG heatmap of one component, beta on the horizontal axis and gamma on
/// the vertical axis, both in degrees.
pub fn render_svg(map: &GridStressMap, component: Component) -> String {
    let (beta, gamma) = (map.beta_axis(), map.gamma_axis());
    let values = map.values(component);
    let finite = || values.iter().copied().filter(|v| v.is_finite());
    let lo = finite().fold(f64::INFINITY, f64::min);
    let hi = finite().fold(f64::NEG_INFINITY, f64::max);
    let norm = |v: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };

    let (eb, eg) = (edges(beta), edges(gamma));
    let (b0, b1) = (eb[0], eb[eb.len() - 1]);
    let (g0, g1) = (eg[0], eg[eg.len() - 1]);
    let span = |a: f64, b: f64| if b > a { b - a } else { 1.0 };
    let px = |b: f64| PLOT_X + (b - b0) / span(b0, b1) * PLOT_W;
    let py = |g: f64| PLOT_Y + PLOT_H - (g - g0) / span(g0, g1) * PLOT_H;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="640" height="500" viewBox="0 0 640 500" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        "<defs><linearGradient id=\"scale\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\">"
    );
    for (k, _) in PALETTE.iter().enumerate() {
        let t = k as f64 / (PALETTE.len() - 1) as f64;
        let _ = writeln!(s, "<stop offset=\"{t}\" stop-color=\"{}\"/>", color(t));
    }
    let _ = writeln!(s, "</linearGradient></defs>");
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\">alpha_{} (N/m^3)</text>",
        PLOT_X + PLOT_W / 2.0,
        component.name()
    );
    let _ = writeln!(s, "<g shape-rendering=\"crispEdges\">");
    for i in 0..beta.len() {
        for j in 0..gamma.len() {
            let (x0, x1) = (px(eb[i]), px(eb[i + 1]));
            let (y0, y1) = (py(eg[j + 1]), py(eg[j]));
            let v = values[(i, j)];
            let _ = writeln!(
                s,
                "<rect x=\"{x0:.3}\" y=\"{y0:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"{}\"><title>{:.4e}</title></rect>",
                x1 - x0,
                y1 - y0,
                color(norm(v)),
                v
            );
        }
    }
    let _ = writeln!(s, "</g>");

    // axes with ticks every 45 degrees
    let bottom = PLOT_Y + PLOT_H;
    let _ = writeln!(
        s,
        "<polyline points=\"{PLOT_X},{PLOT_Y} {PLOT_X},{bottom} {},{bottom}\" fill=\"none\" stroke=\"black\"/>",
        PLOT_X + PLOT_W
    );
    for deg in [-90.0f64, -45.0, 0.0, 45.0, 90.0] {
        let r = deg.to_radians();
        if r >= b0 - 1e-9 && r <= b1 + 1e-9 {
            let x = px(r);
            let _ = writeln!(
                s,
                "<line x1=\"{x:.3}\" y1=\"{bottom}\" x2=\"{x:.3}\" y2=\"{}\" stroke=\"black\"/><text x=\"{x:.3}\" y=\"{}\" text-anchor=\"middle\">{deg}</text>",
                bottom + 5.0,
                bottom + 18.0
            );
        }
        if r >= g0 - 1e-9 && r <= g1 + 1e-9 {
            let y = py(r);
            let _ = writeln!(
                s,
                "<line x1=\"{}\" y1=\"{y:.3}\" x2=\"{PLOT_X}\" y2=\"{y:.3}\" stroke=\"black\"/><text x=\"{}\" y=\"{:.3}\" text-anchor=\"end\">{deg}</text>",
                PLOT_X - 5.0,
                PLOT_X - 8.0,
                y + 4.0
            );
        }
    }
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">β (deg)</text>",
        PLOT_X + PLOT_W / 2.0,
        bottom + 40.0
    );
    let _ = writeln!(
        s,
        "<text x=\"30\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 30 {})\">γ (deg)</text>",
        PLOT_Y + PLOT_H / 2.0,
        PLOT_Y + PLOT_H / 2.0
    );

    // color scale
    let _ = writeln!(
        s,
        "<polygon points=\"{BAR_X},{PLOT_Y} {},{PLOT_Y} {},{bottom} {BAR_X},{bottom}\" fill=\"url(#scale)\" stroke=\"black\"/>",
        BAR_X + BAR_W,
        BAR_X + BAR_W
    );
    let (lo_s, hi_s) = if lo.is_finite() {
        (format!("{lo:.3e}"), format!("{hi:.3e}"))
    } else {
        ("-".into(), "-".into())
    };
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\">{hi_s}</text>",
        BAR_X + BAR_W + 4.0,
        PLOT_Y + 10.0
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{bottom}\">{lo_s}</text>",
        BAR_X + BAR_W + 4.0
    );
    let _ = writeln!(s, "</svg>");
    s
}
