//! Figure data as commented CSV plus a rendered SVG twin.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{write_atomic, ReportError};
use crate::calibration::AcceptanceEstimate;
use crate::review_data::PaperId;
use crate::scoring::ScoreTable;

pub const HISTOGRAM_BINS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `counts.len() + 1` bin edges; the last bin includes its upper edge.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Equal-width bins over `[min, max]`. Constant input gives one bin of
/// width 0.5 centred on the value.
pub fn histogram(values: &[f64], bins: usize) -> Histogram {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if values.is_empty() {
        return Histogram { edges: vec![0.0], counts: Vec::new() };
    }
    if lo == hi || bins <= 1 {
        let (a, b) = if lo == hi { (lo - 0.25, hi + 0.25) } else { (lo, hi) };
        return Histogram { edges: vec![a, b], counts: vec![values.len()] };
    }
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|i| if i == bins { hi } else { lo + width * i as f64 }).collect();
    let mut counts = vec![0; bins];
    for &v in values {
        let i = (((v - lo) / width).floor() as usize).min(bins - 1);
        counts[i] += 1;
    }
    Histogram { edges, counts }
}

/// Data for the three figures.
#[derive(Debug, Clone)]
pub struct PlotData<'a> {
    pub table: &'a ScoreTable,
    /// Calibrated score of every review.
    pub calibrated_reviews: &'a [f64],
    pub acceptance: &'a AcceptanceEstimate,
    /// (paper, meta-reviewer, original, calibrated) per meta-review.
    pub meta: &'a [(PaperId, String, f64, f64)],
}

/// Writes `fig1_histogram`, `fig2_acceptance` and `fig3_meta` as `.csv` and `.svg`.
pub fn emit_plots(dir: &Path, data: &PlotData) -> Result<Vec<PathBuf>, ReportError> {
    if !data.table.has_calibration() {
        return Err(ReportError::MissingColumns("sR_cal, sM_cal, SI_cal".into()));
    }
    let sr_cal: BTreeMap<&PaperId, f64> =
        data.table.rows.iter().filter_map(|r| r.calibrated.map(|c| (&r.paper_id, c.sr_cal))).collect();
    let mut written = Vec::new();

    let hist = histogram(data.calibrated_reviews, HISTOGRAM_BINS);
    let mut csv = String::new();
    csv.push_str("# Histogram of calibrated review scores (posterior mean of the bias-free score of each review).\n");
    let _ = writeln!(
        csv,
        "# {} equal-width bins over [min, max] of the data; bins are [lo, hi) except the last, which includes hi.",
        hist.counts.len()
    );
    csv.push_str("bin_lo,bin_hi,count\n");
    for (i, c) in hist.counts.iter().enumerate() {
        let _ = writeln!(csv, "{},{},{}", hist.edges[i], hist.edges[i + 1], c);
    }
    written.push(put(dir, "fig1_histogram.csv", &csv)?);
    written.push(put(dir, "fig1_histogram.svg", &svg_histogram(&hist))?);

    let mut csv = String::new();
    csv.push_str("# Per-paper acceptance probability against the calibrated reviewer score.\n");
    let _ = writeln!(
        csv,
        "# x: sR_cal in [0, 100]; y: share of {} posterior samples (seed {}) in which the paper was among the top {}.",
        data.acceptance.samples, data.acceptance.seed, data.acceptance.slots
    );
    csv.push_str("paper_id,sR_cal,probability\n");
    let mut points = Vec::new();
    for (i, p) in data.acceptance.papers.iter().enumerate() {
        let x = *sr_cal.get(p).ok_or_else(|| ReportError::MissingColumns(format!("sR_cal for paper {p}")))?;
        let y = data.acceptance.probability(i);
        let _ = writeln!(csv, "{p},{x},{y}");
        points.push((x, y));
    }
    written.push(put(dir, "fig2_acceptance.csv", &csv)?);
    let fig2 = Axes { title: "Acceptance probability", x_label: "calibrated reviewer score sR_cal", y_label: "P(accept)" };
    written.push(put(dir, "fig2_acceptance.svg", &svg_scatter(&fig2, &points, Some((0.0, 100.0)), Some((0.0, 1.0)), false))?);

    let mut csv = String::new();
    csv.push_str("# Meta-review scores before and after calibration, one row per meta-review.\n");
    csv.push_str("# x: original score on the recommendation scale [-3, 3]; y: calibrated score on the same scale.\n");
    csv.push_str("paper_id,metareviewer_id,original,calibrated\n");
    for (p, m, x, y) in data.meta {
        let _ = writeln!(csv, "{p},{m},{x},{y}");
    }
    written.push(put(dir, "fig3_meta.csv", &csv)?);
    let points: Vec<(f64, f64)> = data.meta.iter().map(|e| (e.2, e.3)).collect();
    let fig3 = Axes { title: "Meta-review calibration", x_label: "original score", y_label: "calibrated score" };
    written.push(put(dir, "fig3_meta.svg", &svg_scatter(&fig3, &points, None, None, true))?);
    Ok(written)
}

fn put(dir: &Path, name: &str, body: &str) -> Result<PathBuf, ReportError> {
    let path = dir.join(name);
    write_atomic(&path, |w| w.write_all(body.as_bytes()).map_err(ReportError::from))?;
    Ok(path)
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const M: f64 = 60.0;

struct Axes<'a> {
    title: &'a str,
    x_label: &'a str,
    y_label: &'a str,
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        M + (x - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * M)
    }

    fn py(&self, y: f64) -> f64 {
        H - M - (y - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * M)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if lo.is_finite() && hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else if lo.is_finite() {
        (lo - 1.0, lo + 1.0)
    } else {
        (0.0, 1.0)
    }
}

fn svg_open(axes: &Axes, frame: &Frame) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, axes.title);
    let _ = writeln!(
        s,
        r#"<line x1="{M}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{M}" y1="{M}" x2="{M}" y2="{b}" stroke="black"/>"#,
        b = H - M,
        r = W - M
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = frame.x.0 + t * (frame.x.1 - frame.x.0);
        let yv = frame.y.0 + t * (frame.y.1 - frame.y.0);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            frame.px(xv),
            H - M + 16.0,
            tick(xv)
        );
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, M - 6.0, frame.py(yv) + 4.0, tick(yv));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 18.0, axes.x_label);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{y}" text-anchor="middle" transform="rotate(-90 16 {y})">{}</text>"#,
        axes.y_label,
        y = H / 2.0
    );
    s
}

fn tick(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn svg_histogram(h: &Histogram) -> String {
    let max = h.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let frame = Frame {
        x: widen(h.edges[0], *h.edges.last().expect("edges")),
        y: (0.0, max * 1.05),
    };
    let axes = Axes { title: "Calibrated review scores", x_label: "calibrated score", y_label: "reviews" };
    let mut s = svg_open(&axes, &frame);
    for (i, &c) in h.counts.iter().enumerate() {
        let (x0, x1) = (frame.px(h.edges[i]), frame.px(h.edges[i + 1]));
        let y = frame.py(c as f64);
        let _ = writeln!(
            s,
            r##"<rect x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="#4c72b0" stroke="white"/>"##,
            (x1 - x0).max(0.5),
            H - M - y
        );
    }
    s.push_str("</svg>\n");
    s
}

fn widen(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn svg_scatter(
    axes: &Axes,
    points: &[(f64, f64)],
    x: Option<(f64, f64)>,
    y: Option<(f64, f64)>,
    diagonal: bool,
) -> String {
    let span = |f: fn(&(f64, f64)) -> f64| {
        let (lo, hi) = points.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
        padded(lo, hi)
    };
    let mut frame = Frame { x: x.unwrap_or_else(|| span(|p| p.0)), y: y.unwrap_or_else(|| span(|p| p.1)) };
    if diagonal {
        let lo = frame.x.0.min(frame.y.0);
        let hi = frame.x.1.max(frame.y.1);
        frame = Frame { x: (lo, hi), y: (lo, hi) };
    }
    let mut s = svg_open(axes, &frame);
    if diagonal {
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="4 3"/>"#,
            frame.px(frame.x.0),
            frame.py(frame.x.0),
            frame.px(frame.x.1),
            frame.py(frame.x.1)
        );
    }
    for &(px, py) in points {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="#c44e52" fill-opacity="0.6"/>"##,
            frame.px(px),
            frame.py(py)
        );
    }
    s.push_str("</svg>\n");
    s
}
