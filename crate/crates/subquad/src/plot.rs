//! Deterministic SVG line plots: fixed canvas, polyline series, text labels.
//! No timestamps, no external references, no font-metric dependence; byte
//! output is a pure function of the input.

use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("log axes require strictly positive coordinates")]
    NonPositiveUnderLogAxes,
    #[error("series must be non-empty")]
    EmptySeries,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axes {
    Linear,
    LogLog,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

fn fmt(v: f64) -> String {
    format!("{v:.6e}")
}

/// Renders the series to `path`. Identical inputs produce byte-identical
/// files.
pub fn emit_plot(series: &[Series], axes: Axes, path: &Path) -> Result<(), PlotError> {
    let svg = render(series, axes)?;
    std::fs::write(path, svg)?;
    Ok(())
}

pub fn render(series: &[Series], axes: Axes) -> Result<String, PlotError> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return Err(PlotError::EmptySeries);
    }
    let transform = |v: f64| -> f64 {
        match axes {
            Axes::Linear => v,
            Axes::LogLog => v.ln(),
        }
    };
    if axes == Axes::LogLog {
        for s in series {
            if s.points.iter().any(|(x, y)| *x <= 0.0 || *y <= 0.0) {
                return Err(PlotError::NonPositiveUnderLogAxes);
            }
        }
    }
    let mut xlo = f64::INFINITY;
    let mut xhi = f64::NEG_INFINITY;
    let mut ylo = f64::INFINITY;
    let mut yhi = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            let (tx, ty) = (transform(x), transform(y));
            xlo = xlo.min(tx);
            xhi = xhi.max(tx);
            ylo = ylo.min(ty);
            yhi = yhi.max(ty);
        }
    }
    // Degenerate ranges get a unit pad so single points render.
    if !(xhi > xlo) {
        xlo -= 1.0;
        xhi += 1.0;
    }
    if !(yhi > ylo) {
        ylo -= 1.0;
        yhi += 1.0;
    }
    let px = |tx: f64| MARGIN_L + (tx - xlo) / (xhi - xlo) * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |ty: f64| HEIGHT - MARGIN_B - (ty - ylo) / (yhi - ylo) * (HEIGHT - MARGIN_T - MARGIN_B);

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(out, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    // Axes.
    let _ = writeln!(
        out,
        "<line x1=\"{MARGIN_L}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        HEIGHT - MARGIN_B,
        WIDTH - MARGIN_R,
        HEIGHT - MARGIN_B
    );
    let _ = writeln!(
        out,
        "<line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{}\" stroke=\"black\"/>",
        HEIGHT - MARGIN_B
    );
    // Ticks: five per axis at equal spacing in transformed coordinates.
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let tx = xlo + f * (xhi - xlo);
        let ty = ylo + f * (yhi - ylo);
        let (label_x, label_y) = match axes {
            Axes::Linear => (tx, ty),
            Axes::LogLog => (tx.exp(), ty.exp()),
        };
        let _ = writeln!(
            out,
            "<text x=\"{x}\" y=\"{y}\" font-size=\"10\" text-anchor=\"middle\">{t}</text>",
            x = px(tx),
            y = HEIGHT - MARGIN_B + 16.0,
            t = fmt(label_x)
        );
        let _ = writeln!(
            out,
            "<text x=\"{x}\" y=\"{y}\" font-size=\"10\" text-anchor=\"end\">{t}</text>",
            x = MARGIN_L - 4.0,
            y = py(ty) + 3.0,
            t = fmt(label_y)
        );
    }
    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        if s.points.len() > 1 {
            let mut d = String::new();
            for &(x, y) in &s.points {
                let _ = write!(d, "{},{} ", px(transform(x)), py(transform(y)));
            }
            let _ = writeln!(
                out,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                d.trim_end()
            );
        }
        // Markers whenever the series is small enough to read individually.
        if s.points.len() <= 200 {
            for &(x, y) in &s.points {
                let _ = writeln!(
                    out,
                    "<circle cx=\"{}\" cy=\"{}\" r=\"2.5\" fill=\"{color}\"/>",
                    px(transform(x)),
                    py(transform(y))
                );
            }
        }
        // Legend entry.
        let ly = MARGIN_T + 14.0 * si as f64;
        let _ = writeln!(
            out,
            "<rect x=\"{x}\" y=\"{y}\" width=\"10\" height=\"10\" fill=\"{color}\"/>",
            x = WIDTH - MARGIN_R - 150.0,
            y = ly
        );
        let _ = writeln!(
            out,
            "<text x=\"{x}\" y=\"{y}\" font-size=\"11\">{name}</text>",
            x = WIDTH - MARGIN_R - 136.0,
            y = ly + 9.0,
            name = xml_escape(&s.name)
        );
    }
    let _ = writeln!(out, "</svg>");
    Ok(out)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_series_renders_a_marker() {
        let s = vec![Series { name: "p".into(), points: vec![(1.0, 2.0)] }];
        let svg = render(&s, Axes::Linear).unwrap();
        assert!(svg.contains("<circle"));
        assert!(svg.contains("</svg>"));
    }

    #[test]
    fn identical_inputs_are_byte_identical() {
        let s = vec![Series {
            name: "a".into(),
            points: (1..50).map(|i| (i as f64, 1.0 / i as f64)).collect(),
        }];
        let one = render(&s, Axes::LogLog).unwrap();
        let two = render(&s, Axes::LogLog).unwrap();
        assert_eq!(one, two);
    }

    #[test]
    fn log_axes_reject_nonpositive() {
        let s = vec![Series { name: "bad".into(), points: vec![(0.0, 1.0)] }];
        assert!(matches!(render(&s, Axes::LogLog), Err(PlotError::NonPositiveUnderLogAxes)));
    }
}
