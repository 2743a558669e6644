//! Minimal SVG line chart for threshold sweeps.

use std::fmt::Write as _;

use crate::linkage::LinkageResult;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn x(t: f64) -> f64 {
    MARGIN + t * (WIDTH - 2.0 * MARGIN)
}

fn y(v: f64) -> f64 {
    HEIGHT - MARGIN - v * (HEIGHT - 2.0 * MARGIN)
}

fn polyline(out: &mut String, points: impl Iterator<Item = (f64, f64)>, color: &str, dashed: bool) {
    let pts: Vec<String> = points.map(|(t, v)| format!("{:.2},{:.2}", x(t), y(v))).collect();
    if pts.is_empty() {
        return;
    }
    let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
    let _ = writeln!(
        out,
        r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
        pts.join(" ")
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Precision (solid) and recall (dashed) against the threshold, one colour
/// per labelled series. Points with an undefined value are left out.
pub fn sweep_chart(series: &[(String, Vec<LinkageResult>)]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<path d="M{l},{t} V{b} H{r}" fill="none" stroke="black"/>"#,
        l = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{v:.1}</text>"#, x(v), HEIGHT - MARGIN + 16.0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"#, MARGIN - 6.0, y(v) + 4.0);
    }
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">threshold t</text>"#, WIDTH / 2.0, HEIGHT - 10.0);
    for (k, (label, results)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        polyline(&mut out, results.iter().filter_map(|r| r.precision.map(|p| (r.threshold, p))), color, false);
        polyline(&mut out, results.iter().filter_map(|r| r.recall.map(|p| (r.threshold, p))), color, true);
        let ly = MARGIN + 14.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{ly:.2}" fill="{color}">{}</text>"#,
            WIDTH - MARGIN - 120.0,
            escape(label)
        );
    }
    out.push_str("</svg>\n");
    out
}
