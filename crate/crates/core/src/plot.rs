//! Labelled 2-D scatter plots as plain SVG 1.1.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const UNLABELED_COLOR: &str = "#9e9e9e";

/// Colors handed out in sorted label order, cycling when exhausted.
pub const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#bcbd22",
    "#393b79", "#637939", "#843c39",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterSpec {
    /// `n × 2` coordinates.
    pub points: Matrix,
    pub labels: Vec<Option<String>>,
    pub width: u32,
    pub height: u32,
    pub legend: bool,
    pub title: Option<String>,
}

impl ScatterSpec {
    pub fn new(points: Matrix) -> Self {
        let n = points.nrows();
        ScatterSpec {
            points,
            labels: vec![None; n],
            width: 800,
            height: 600,
            legend: true,
            title: None,
        }
    }

    pub fn with_labels(mut self, labels: Vec<Option<String>>) -> Self {
        self.labels = labels;
        self
    }

    /// Label → color, in sorted label order.
    pub fn palette(&self) -> Vec<(String, &'static str)> {
        let set: BTreeSet<&String> = self.labels.iter().flatten().collect();
        set.into_iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), PALETTE[i % PALETTE.len()]))
            .collect()
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Range of one axis, widened to ±0.5 when all values coincide.
fn axis_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) }
}

pub fn render_svg(spec: &ScatterSpec) -> Result<String> {
    let p = &spec.points;
    let n = p.nrows();
    if n == 0 {
        return Err(Error::EmptyInput("scatter plot needs at least one point".into()));
    }
    if p.ncols() != 2 {
        return Err(Error::param(format!("scatter plot needs 2 columns, got {}", p.ncols())));
    }
    if spec.labels.len() != n {
        return Err(Error::DimensionMismatch { left: spec.labels.len(), right: n });
    }
    if p.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::param("scatter plot coordinates must be finite"));
    }
    if spec.width == 0 || spec.height == 0 {
        return Err(Error::param("plot size must be positive"));
    }
    let (w, h) = (spec.width as f64, spec.height as f64);
    let (mx, my) = (0.05 * w, 0.05 * h);
    let (x0, x1) = axis_range(p.rows_iter().map(|r| r[0]));
    let (y0, y1) = axis_range(p.rows_iter().map(|r| r[1]));
    let sx = |x: f64| mx + (x - x0) / (x1 - x0) * (w - 2.0 * mx);
    let sy = |y: f64| h - my - (y - y0) / (y1 - y0) * (h - 2.0 * my);

    let palette = spec.palette();
    let color_of = |label: &Option<String>| match label {
        Some(l) => palette.iter().find(|(k, _)| k == l).map_or(UNLABELED_COLOR, |(_, c)| c),
        None => UNLABELED_COLOR,
    };

    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">",
        spec.width, spec.height, spec.width, spec.height
    );
    let _ = writeln!(s, "<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"white\"/>", spec.width, spec.height);
    if let Some(t) = &spec.title {
        let _ = writeln!(s, "<title>{}</title>", escape(t));
    }
    let _ = writeln!(
        s,
        "<rect x=\"{mx:.2}\" y=\"{my:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#cccccc\"/>",
        w - 2.0 * mx,
        h - 2.0 * my
    );
    s.push_str("<g stroke=\"none\" fill-opacity=\"0.8\">\n");
    for (row, label) in p.rows_iter().zip(&spec.labels) {
        let _ = writeln!(
            s,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\"/>",
            sx(row[0]),
            sy(row[1]),
            color_of(label)
        );
    }
    s.push_str("</g>\n");

    if spec.legend && !palette.is_empty() {
        let (lx, ly, step) = (w - mx - 150.0, my + 10.0, 18.0);
        s.push_str("<g font-family=\"sans-serif\" font-size=\"12\">\n");
        for (i, (label, color)) in palette.iter().enumerate() {
            let y = ly + step * i as f64;
            let _ = writeln!(s, "<rect x=\"{lx:.2}\" y=\"{y:.2}\" width=\"10\" height=\"10\" fill=\"{color}\"/>");
            let _ = writeln!(s, "<text x=\"{:.2}\" y=\"{:.2}\">{}</text>", lx + 16.0, y + 9.0, escape(label));
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn plot_scatter(spec: &ScatterSpec, path: &Path) -> Result<()> {
    let svg = render_svg(spec)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
