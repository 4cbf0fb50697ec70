//! Minimal SVG line plots for latent-direction panels.

use std::fmt::Write;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 320.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 36.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

pub struct Curve {
    pub label: String,
    pub values: Vec<f64>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Renders overlaid curves sharing one symmetric y range.
pub fn render_panel(title: &str, curves: &[Curve]) -> String {
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let n = curves.iter().map(|c| c.values.len()).max().unwrap_or(0);
    let mut y_max = curves
        .iter()
        .flat_map(|c| c.values.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if !(y_max > 0.0) {
        y_max = 1.0;
    }
    let x_of = |i: usize| MARGIN_LEFT + plot_w * i as f64 / (n.max(2) - 1) as f64;
    let y_of = |v: f64| MARGIN_TOP + plot_h * (1.0 - (v / y_max + 1.0) / 2.0);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let zero = y_of(0.0);
    let _ = writeln!(
        out,
        r##"<line x1="{MARGIN_LEFT}" y1="{zero:.2}" x2="{}" y2="{zero:.2}" stroke="#cccccc"/>"##,
        MARGIN_LEFT + plot_w
    );
    for (v, y) in [
        (y_max, MARGIN_TOP),
        (0.0, zero),
        (-y_max, MARGIN_TOP + plot_h),
    ] {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.2}" text-anchor="end" dominant-baseline="middle">{}</text>"#,
            MARGIN_LEFT - 6.0,
            y,
            format_tick(v)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN_LEFT}" y="{}" text-anchor="start">0</text>"#,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        MARGIN_LEFT + plot_w,
        HEIGHT - 14.0,
        n.saturating_sub(1)
    );
    for (c, curve) in curves.iter().enumerate() {
        let colour = PALETTE[c % PALETTE.len()];
        let mut points = String::with_capacity(curve.values.len() * 14);
        for (i, v) in curve.values.iter().enumerate() {
            let _ = write!(points, "{:.2},{:.2} ", x_of(i), y_of(*v));
        }
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.2" points="{}"/>"#,
            points.trim_end()
        );
        let ly = MARGIN_TOP + 14.0 + 16.0 * c as f64;
        let lx = MARGIN_LEFT + plot_w + 12.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/><text x="{}" y="{ly}" dominant-baseline="middle">{}</text>"#,
            lx + 18.0,
            lx + 24.0,
            escape(&curve.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 0.01 && v.abs() < 1000.0 {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}
