//! Standalone SVG convergence plots: max violation against iteration, one
//! polyline per trace.

use std::fmt::Write as _;

use crate::trace::TraceRow;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const TICKS: usize = 5;
/// Longer traces are thinned to this many points per series.
const MAX_POINTS: usize = 2000;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series<'a> {
    pub label: String,
    pub rows: &'a [TraceRow],
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn fit(series: &[Series<'_>]) -> Self {
        let rows = series.iter().flat_map(|s| s.rows.iter());
        let (mut x_min, mut x_max, mut y_min, mut y_max) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for r in rows.filter(|r| r.max_violation.is_finite()) {
            x_min = x_min.min(r.t as f64);
            x_max = x_max.max(r.t as f64);
            y_min = y_min.min(r.max_violation);
            y_max = y_max.max(r.max_violation);
        }
        if x_max <= x_min {
            x_max = x_min + 1.0;
        }
        if y_max <= y_min {
            y_min -= 0.5;
            y_max += 0.5;
        }
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    fn x(&self, t: f64) -> f64 {
        LEFT + (t - self.x_min) / (self.x_max - self.x_min) * (WIDTH - LEFT - RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - BOTTOM - (v - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - TOP - BOTTOM)
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-3) {
        format!("{v:.2e}")
    } else {
        format!("{}", (v * 1e4).round() / 1e4)
    }
}

/// Renders every non-empty series. Callers reject empty input beforehand.
pub fn render(series: &[Series<'_>]) -> String {
    let frame = Frame::fit(series);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        svg,
        r#"<g stroke="black" fill="none"><rect x="{x0}" y="{y0}" width="{}" height="{}"/></g>"#,
        x1 - x0,
        y1 - y0
    );
    for i in 0..=TICKS {
        let frac = i as f64 / TICKS as f64;
        let t = frame.x_min + frac * (frame.x_max - frame.x_min);
        let v = frame.y_min + frac * (frame.y_max - frame.y_min);
        let (px, py) = (frame.x(t), frame.y(v));
        let _ = writeln!(
            svg,
            r##"<line x1="{px:.2}" y1="{y1}" x2="{px:.2}" y2="{:.2}" stroke="#888"/>"##,
            y1 + 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y1 + 20.0,
            label(t.round())
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="#888"/>"##,
            x0 - 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 8.0,
            py + 4.0,
            label(v)
        );
    }
    if frame.y_min < 0.0 && frame.y_max > 0.0 {
        let zero = frame.y(0.0);
        let _ = writeln!(
            svg,
            r##"<line x1="{x0}" y1="{zero:.2}" x2="{x1}" y2="{zero:.2}" stroke="#bbb" stroke-dasharray="4 3"/>"##
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">iteration</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(16 {:.2}) rotate(-90)" text-anchor="middle">max violation</text>"#,
        (y0 + y1) / 2.0
    );

    for (idx, s) in series.iter().enumerate() {
        let color = COLORS[idx % COLORS.len()];
        let stride = s.rows.len().div_ceil(MAX_POINTS).max(1);
        let points = s
            .rows
            .iter()
            .enumerate()
            .filter(|(i, r)| (i % stride == 0 || *i + 1 == s.rows.len()) && r.max_violation.is_finite())
            .map(|(_, r)| format!("{:.2},{:.2}", frame.x(r.t as f64), frame.y(r.max_violation)))
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>"#
        );
        let ly = y0 + 16.0 + 16.0 * idx as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            x1 - 170.0,
            x1 - 150.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            x1 - 145.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(values: &[f64]) -> Vec<TraceRow> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| TraceRow {
                t: i + 1,
                max_violation: v,
                running_average: v,
                oracle_iterations: 0,
                elapsed_seconds: None,
                violations: v.to_string(),
            })
            .collect()
    }

    #[test]
    fn one_polyline_per_series() {
        let a = rows(&[0.5, 0.2, 0.1]);
        let b = rows(&[0.4, -0.1]);
        let svg = render(&[
            Series {
                label: "a".into(),
                rows: &a,
            },
            Series {
                label: "b<&>".into(),
                rows: &b,
            },
        ]);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("b&lt;&amp;&gt;"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn flat_single_point_trace_renders() {
        let a = rows(&[0.0]);
        let svg = render(&[Series {
            label: "flat".into(),
            rows: &a,
        }]);
        assert!(!svg.contains("NaN"));
        assert!(svg.contains("<polyline"));
    }

    #[test]
    fn long_traces_are_thinned() {
        let a = rows(&vec![0.1; 10_000]);
        let svg = render(&[Series {
            label: "long".into(),
            rows: &a,
        }]);
        let points = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert!(points.split(' ').count() <= MAX_POINTS + 1);
    }
}
