//! Bare-bones SVG line plots: axes, a polyline per series, labels.

use std::fmt::Write as _;

use crate::dynamics::Trace;
use crate::harness::report::Table;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
/// Longer series are decimated to about this many points.
const MAX_POINTS: usize = 4000;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn bounds(series: &[Series]) -> Option<(f64, f64, f64, f64)> {
    let mut it = series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let &(x0, y0) = it.next()?;
    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (x0, x0, y0, y0);
    for &(x, y) in it {
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        y_lo = y_lo.min(y);
        y_hi = y_hi.max(y);
    }
    if x_hi == x_lo {
        x_hi = x_lo + 1.0;
    }
    if y_hi == y_lo {
        let pad = if y_lo == 0.0 { 1.0 } else { 0.05 * y_lo.abs() };
        y_lo -= pad;
        y_hi += pad;
    }
    Some((x_lo, x_hi, y_lo, y_hi))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Render series sharing one pair of axes.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title));
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN / 2.0, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(
        svg,
        r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );

    if let Some((xa, xb, ya, yb)) = bounds(series) {
        let px = |x: f64| x0 + (x - xa) / (xb - xa) * (x1 - x0);
        let py = |y: f64| y0 - (y - ya) / (yb - ya) * (y0 - y1);
        for (v, anchor, x, y) in [(xa, "start", x0, y0 + 16.0), (xb, "end", x1, y0 + 16.0)] {
            let _ = writeln!(svg, r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{v:.4e}</text>"#);
        }
        for (v, y) in [(ya, y0), (yb, y1)] {
            let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{v:.4e}</text>"#, x0 - 4.0, y + 4.0);
        }
        for (i, s) in series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let stride = (s.points.len() / MAX_POINTS).max(1);
            let pts: Vec<String> = s
                .points
                .iter()
                .step_by(stride)
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
                pts.join(" ")
            );
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
                x0 + 10.0,
                y1 + 16.0 * (i as f64 + 1.0),
                escape(&s.label)
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Tilt angle in degrees against time.
pub fn trace_plot(title: &str, trace: &Trace) -> String {
    let points = trace.rows.iter().map(|r| (r.t, r.theta.to_degrees())).collect();
    line_plot(
        title,
        "t [s]",
        "theta [deg]",
        &[Series {
            label: "theta".into(),
            points,
        }],
    )
}

/// Every numeric column against the first one. `None` for tables with fewer
/// than two columns or no rows.
pub fn table_plot(title: &str, table: &Table) -> Option<String> {
    if table.columns.len() < 2 || table.rows.is_empty() {
        return None;
    }
    let series: Vec<Series> = (1..table.columns.len())
        .map(|c| Series {
            label: table.columns[c].clone(),
            points: table
                .rows
                .iter()
                .filter_map(|r| Some((r[0].as_f64()?, r[c].as_f64()?)))
                .collect(),
        })
        .collect();
    Some(line_plot(title, &table.columns[0], "value", &series))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plot_is_well_formed() {
        let svg = line_plot(
            "a < b",
            "x",
            "y",
            &[Series {
                label: "s".into(),
                points: vec![(0.0, 1.0), (1.0, 2.0), (2.0, f64::NAN)],
            }],
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt; b"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn flat_and_empty_series() {
        let flat = line_plot("t", "x", "y", &[Series { label: "c".into(), points: vec![(0.0, 0.0), (1.0, 0.0)] }]);
        assert!(!flat.contains("inf"));
        let empty = line_plot("t", "x", "y", &[]);
        assert!(!empty.contains("<polyline"));
    }
}
