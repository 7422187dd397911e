//! Minimal self-contained SVG line charts, no external assets.

use std::fmt::Write as _;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 168.0;
const MARGIN_TOP: f64 = 48.0;
const MARGIN_BOTTOM: f64 = 56.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            label: label.into(),
            points,
        }
    }
}

/// Render a line chart. Empty input produces a labelled placeholder so a
/// report is never a broken image.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let points: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"13\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"26\" font-size=\"17\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    );
    if points.is_empty() {
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"#666\">no data</text>\n</svg>\n",
            WIDTH / 2.0,
            HEIGHT / 2.0
        );
        return svg;
    }

    let (x_min, x_max) = padded_range(points.iter().map(|p| p.0), 0.0);
    let (y_min, y_max) = padded_range(points.iter().map(|p| p.1), 0.05);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let to_x = |x: f64| MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let to_y = |y: f64| MARGIN_TOP + plot_h - (y - y_min) / (y_max - y_min) * plot_h;

    // Grid lines and tick labels, five per axis.
    for i in 0..=4 {
        let fx = x_min + (x_max - x_min) * f64::from(i) / 4.0;
        let fy = y_min + (y_max - y_min) * f64::from(i) / 4.0;
        let px = to_x(fx);
        let py = to_y(fy);
        let _ = write!(
            svg,
            "<line x1=\"{px:.1}\" y1=\"{MARGIN_TOP}\" x2=\"{px:.1}\" y2=\"{:.1}\" stroke=\"#ddd\"/>\n\
             <line x1=\"{MARGIN_LEFT}\" y1=\"{py:.1}\" x2=\"{:.1}\" y2=\"{py:.1}\" stroke=\"#ddd\"/>\n\
             <text x=\"{px:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
            MARGIN_TOP + plot_h,
            MARGIN_LEFT + plot_w,
            MARGIN_TOP + plot_h + 20.0,
            tick(fx),
            MARGIN_LEFT - 8.0,
            py + 4.0,
            tick(fy),
        );
    }
    let _ = write!(
        svg,
        "<rect x=\"{MARGIN_LEFT}\" y=\"{MARGIN_TOP}\" width=\"{plot_w}\" height=\"{plot_h}\" \
         fill=\"none\" stroke=\"#333\"/>\n\
         <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"18\" y=\"{:.1}\" text-anchor=\"middle\" \
         transform=\"rotate(-90 18 {:.1})\">{}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 14.0,
        escape(x_label),
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape(y_label),
    );

    for (index, s) in series.iter().enumerate() {
        let color = PALETTE[index % PALETTE.len()];
        if s.points.is_empty() {
            continue;
        }
        let path: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.1},{:.1}", to_x(x), to_y(y)))
            .collect();
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
            path.join(" ")
        );
        // Lone points would otherwise be invisible.
        if s.points.len() == 1 {
            let (x, y) = s.points[0];
            let _ = writeln!(
                svg,
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{color}\"/>",
                to_x(x),
                to_y(y)
            );
        }
        let ly = MARGIN_TOP + 14.0 + 20.0 * index as f64;
        let _ = write!(
            svg,
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" \
             stroke=\"{color}\" stroke-width=\"2\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\">{}</text>\n",
            MARGIN_LEFT + plot_w + 12.0,
            MARGIN_LEFT + plot_w + 34.0,
            MARGIN_LEFT + plot_w + 40.0,
            ly + 4.0,
            escape(&s.label),
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn padded_range(values: impl Iterator<Item = f64>, pad_fraction: f64) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for v in values {
        min = min.min(v);
        max = max.max(v);
    }
    if min == max {
        let half = if min == 0.0 { 0.5 } else { min.abs() * 0.1 };
        return (min - half, max + half);
    }
    let pad = (max - min) * pad_fraction;
    (min - pad, max + pad)
}

fn tick(value: f64) -> String {
    if value == 0.0 {
        "0".to_string()
    } else if value.abs() < 0.01 || value.abs() >= 10_000.0 {
        format!("{value:.1e}")
    } else {
        format!("{value:.3}")
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_renders_series_and_legend() {
        let svg = line_chart(
            "score over rounds",
            "round",
            "score",
            &[
                Series::new("color", vec![(0.0, 0.1), (1.0, 0.2), (2.0, 0.35)]),
                Series::new("overall", vec![(0.0, 0.05), (1.0, 0.3), (2.0, 0.4)]),
            ],
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
        assert!(svg.contains("color"));
        assert!(svg.contains("overall"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn empty_chart_is_a_placeholder_not_a_panic() {
        let svg = line_chart("empty", "x", "y", &[]);
        assert!(svg.contains("no data"));
    }

    #[test]
    fn flat_and_tiny_values_get_readable_ticks() {
        let svg = line_chart(
            "flat",
            "x",
            "y",
            &[Series::new("s", vec![(0.0, 2e-4), (1.0, 2e-4)])],
        );
        assert!(svg.contains("e-"), "tiny ticks use scientific notation");
        assert_eq!(tick(0.0), "0");
        assert_eq!(tick(0.5), "0.500");
    }

    #[test]
    fn labels_are_escaped() {
        let svg = line_chart("a<b", "x&y", "y", &[]);
        assert!(svg.contains("a&lt;b"));
        assert!(!svg.contains("a<b"));
    }
}
