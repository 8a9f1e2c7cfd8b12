//! Minimal line-chart writer. Output depends only on the input, so charts
//! can be committed and diffed.

use std::fmt::Write as _;

use thiserror::Error;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 140.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 48.0;
const TICKS: usize = 5;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChartError {
    #[error("chart has no series")]
    NoSeries,
    #[error("series `{0}` has no points")]
    EmptySeries(String),
    #[error("series `{0}` has a non-finite point")]
    NonFinite(String),
}

/// A named sequence of (x, y) points drawn as one polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            name: name.into(),
            points,
        }
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Fixed two-decimal coordinates with negative zero folded to zero.
fn coord(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo == hi {
        (lo - 1.0, hi + 1.0)
    } else {
        (lo, hi)
    }
}

/// Renders the series as a standalone SVG 1.1 document with one
/// `<polyline>` per series, in the order given.
pub fn emit_svg_chart(series: &[Series], x_label: &str, y_label: &str) -> Result<String, ChartError> {
    if series.is_empty() {
        return Err(ChartError::NoSeries);
    }
    for s in series {
        if s.points.is_empty() {
            return Err(ChartError::EmptySeries(s.name.clone()));
        }
        if s.points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(ChartError::NonFinite(s.name.clone()));
        }
    }
    let all = || series.iter().flat_map(|s| s.points.iter().copied());
    let (x0, x1) = span(all().map(|p| p.0));
    let (y0, y1) = span(all().map(|p| p.1).chain(std::iter::once(0.0)));
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| MARGIN_TOP + plot_h - (y - y0) / (y1 - y0) * plot_h;

    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">",
        w = WIDTH,
        h = HEIGHT
    );
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    let (left, right) = (coord(MARGIN_LEFT), coord(MARGIN_LEFT + plot_w));
    let (top, bottom) = (coord(MARGIN_TOP), coord(MARGIN_TOP + plot_h));
    let _ = writeln!(
        out,
        "<g stroke=\"black\" stroke-width=\"1\"><line x1=\"{left}\" y1=\"{bottom}\" x2=\"{right}\" y2=\"{bottom}\"/><line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{bottom}\"/></g>"
    );
    out.push_str("<g font-family=\"sans-serif\" font-size=\"11\" fill=\"black\">\n");
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            coord(sx(xv)),
            coord(MARGIN_TOP + plot_h + 16.0),
            tick_label(xv)
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>",
            coord(MARGIN_LEFT - 6.0),
            coord(sy(yv) + 4.0),
            tick_label(yv)
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
        coord(MARGIN_LEFT + plot_w / 2.0),
        coord(HEIGHT - 10.0),
        escape(x_label)
    );
    let _ = writeln!(
        out,
        "<text x=\"14\" y=\"{y}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {y})\">{}</text>",
        escape(y_label),
        y = coord(MARGIN_TOP + plot_h / 2.0)
    );
    out.push_str("</g>\n");

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{},{}", coord(sx(x)), coord(sy(y))))
            .collect();
        let _ = writeln!(
            out,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"><title>{}</title></polyline>",
            points.join(" "),
            escape(&s.name)
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" fill=\"{color}\">{}</text>",
            coord(WIDTH - MARGIN_RIGHT + 8.0),
            coord(MARGIN_TOP + 10.0 + 12.0 * i as f64),
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn polylines(svg: &str) -> usize {
        svg.matches("<polyline").count()
    }

    #[test]
    fn single_series_draws_one_polyline() {
        let svg = emit_svg_chart(&[Series::new("a", vec![(0.0, 0.0), (1.0, 1.0)])], "age", "value").unwrap();
        assert_eq!(polylines(&svg), 1);
        assert!(svg.starts_with("<?xml"));
        assert!(svg.contains("version=\"1.1\""));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn output_is_deterministic() {
        let series = vec![
            Series::new("1990", vec![(0.0, 3.0), (1.0, 5.5), (2.0, 4.0)]),
            Series::new("1991", vec![(0.0, 2.0), (1.0, 6.0)]),
        ];
        let a = emit_svg_chart(&series, "age", "citations").unwrap();
        let b = emit_svg_chart(&series, "age", "citations").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn one_polyline_per_series() {
        let series: Vec<Series> = (0..14)
            .map(|i| Series::new(format!("v{i}"), (0..5).map(|a| (a as f64, (a * i) as f64)).collect()))
            .collect();
        let svg = emit_svg_chart(&series, "age", "citations").unwrap();
        assert_eq!(polylines(&svg), 14);
    }

    #[test]
    fn empty_inputs_are_rejected() {
        assert_eq!(emit_svg_chart(&[], "x", "y"), Err(ChartError::NoSeries));
        assert_eq!(
            emit_svg_chart(&[Series::new("e", vec![])], "x", "y"),
            Err(ChartError::EmptySeries("e".into()))
        );
        assert!(matches!(
            emit_svg_chart(&[Series::new("n", vec![(0.0, f64::NAN)])], "x", "y"),
            Err(ChartError::NonFinite(_))
        ));
    }

    #[test]
    fn labels_are_escaped() {
        let svg = emit_svg_chart(&[Series::new("A & B <c>", vec![(0.0, 1.0)])], "x", "y").unwrap();
        assert!(svg.contains("A &amp; B &lt;c&gt;"));
        assert!(!svg.contains("A & B"));
    }
}
