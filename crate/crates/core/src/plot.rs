//! Static SVG output: trajectory overlays and relative-error box plots.
//! Coordinates are printed with fixed precision so equal inputs give equal
//! bytes.

use std::fmt::Write as _;

use crate::dataset::PoseRow;
use crate::error::{Error, Result};
use crate::evaluation::RelativeErrorReport;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn header(out: &mut String) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(out, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Overlays named trajectories with equal axis scaling. Rows whose status
/// is `new_keyframe` get a circle marker.
pub fn trajectory_svg(series: &[(String, Vec<PoseRow>)]) -> Result<String> {
    if series.is_empty() {
        return Err(Error::InvalidParameter("nothing to plot".into()));
    }
    if let Some((name, _)) = series.iter().find(|(_, rows)| rows.is_empty()) {
        return Err(Error::InvalidParameter(format!("trajectory `{name}` is empty")));
    }
    let all = series.iter().flat_map(|(_, rows)| rows.iter().map(|r| (r.pose.x, r.pose.y)));
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for (x, y) in all {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-6);
    let scale = ((WIDTH - 2.0 * MARGIN) / span).min((HEIGHT - 2.0 * MARGIN) / span);
    let to_px = |x: f64, y: f64| (MARGIN + (x - x0) * scale, HEIGHT - MARGIN - (y - y0) * scale);

    let mut out = String::new();
    header(&mut out);
    for (k, (name, rows)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let _ = write!(out, "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"");
        for (i, r) in rows.iter().enumerate() {
            let (px, py) = to_px(r.pose.x, r.pose.y);
            let sep = if i == 0 { "" } else { " " };
            let _ = write!(out, "{sep}{px:.2},{py:.2}");
        }
        out.push_str("\"/>\n");
        for r in rows.iter().filter(|r| r.status.as_deref() == Some("new_keyframe")) {
            let (px, py) = to_px(r.pose.x, r.pose.y);
            let _ = writeln!(out, "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"2.5\" fill=\"{color}\"/>");
        }
        let ly = 20.0 + 18.0 * k as f64;
        let _ = writeln!(
            out,
            "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"3\"/>",
            WIDTH - 170.0,
            WIDTH - 145.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
            WIDTH - 138.0,
            ly + 4.0,
            escape(name)
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{MARGIN}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">x [{x0:.2}, {x1:.2}] m, y [{y0:.2}, {y1:.2}] m</text>",
        HEIGHT - 15.0
    );
    out.push_str("</svg>\n");
    Ok(out)
}

/// Which report metric a box plot shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    TranslationPercent,
    RotationDegrees,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::TranslationPercent => "translation_pct",
            Metric::RotationDegrees => "rotation_deg",
        }
    }
}

/// One box per segment length with whiskers at min and max.
pub fn box_plot_svg(report: &RelativeErrorReport, metric: Metric) -> String {
    let boxes: Vec<_> = report
        .segments
        .iter()
        .map(|s| {
            let summary = match metric {
                Metric::TranslationPercent => s.translation_summary(),
                Metric::RotationDegrees => s.rotation_summary(),
            };
            (s.length, summary)
        })
        .collect();
    let top = boxes
        .iter()
        .filter_map(|(_, s)| s.map(|s| s.max))
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let to_y = |v: f64| HEIGHT - MARGIN - v / top * plot_h;
    let slot = (WIDTH - 2.0 * MARGIN) / boxes.len().max(1) as f64;

    let mut out = String::new();
    header(&mut out);
    let _ = writeln!(
        out,
        "<text x=\"{MARGIN}\" y=\"25\" font-family=\"sans-serif\" font-size=\"14\">{} (max {top:.4})</text>",
        metric.as_str()
    );
    let _ = writeln!(
        out,
        "<line x1=\"{MARGIN}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>",
        HEIGHT - MARGIN,
        WIDTH - MARGIN
    );
    for (k, (length, summary)) in boxes.iter().enumerate() {
        let cx = MARGIN + slot * (k as f64 + 0.5);
        let half = slot * 0.25;
        if let Some(s) = summary {
            let _ = writeln!(
                out,
                "<line x1=\"{cx:.2}\" y1=\"{:.2}\" x2=\"{cx:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
                to_y(s.min),
                to_y(s.max)
            );
            let _ = writeln!(
                out,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#9ecae1\" stroke=\"black\"/>",
                cx - half,
                to_y(s.q3),
                2.0 * half,
                (to_y(s.q1) - to_y(s.q3)).max(0.0)
            );
            let _ = writeln!(
                out,
                "<line x1=\"{:.2}\" y1=\"{2:.2}\" x2=\"{:.2}\" y2=\"{2:.2}\" stroke=\"#d62728\" stroke-width=\"2\"/>",
                cx - half,
                cx + half,
                to_y(s.median)
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{cx:.2}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{length} m</text>",
            HEIGHT - MARGIN + 18.0
        );
    }
    out.push_str("</svg>\n");
    out
}
