//! Deterministic artifact writers: CSV tables and standalone SVG 1.1
//! plots. Reruns with the same data produce byte-identical files.

use crate::CliError;
use hetheat_core::fit::least_squares_line;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

/// Write a CSV file: a `# run <id> seed <seed>` provenance comment, a
/// header row, then the data rows. Floats are rendered with Rust's
/// round-trip `Display`, so identical data gives identical bytes.
pub fn write_csv(
    path: &Path,
    run_id: &str,
    seed: u64,
    header: &str,
    rows: &[Vec<String>],
) -> Result<(), CliError> {
    let mut text = format!("# run {run_id} seed {seed}\n{header}\n");
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn cell(v: f64) -> String {
    format!("{v}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Line,
    LogLog,
}

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// Render one or more series as a standalone SVG. Log-log plots get a
/// least-squares slope annotation for the first series. Empty input is
/// rejected; a single point renders as a marker.
pub fn emit_plot(
    series: &[Series<'_>],
    kind: PlotKind,
    title: &str,
    xlabel: &str,
    ylabel: &str,
    run_id: &str,
    path: &Path,
) -> Result<(), CliError> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return Err(CliError::EmptyPlot {
            title: title.to_string(),
        });
    }
    let transform = |v: f64| -> f64 {
        match kind {
            PlotKind::Line => v,
            PlotKind::LogLog => v.log10(),
        }
    };
    let mut pts_t: Vec<Vec<(f64, f64)>> = Vec::new();
    for s in series {
        let mut t = Vec::with_capacity(s.points.len());
        for &(x, y) in &s.points {
            if kind == PlotKind::LogLog && (x <= 0.0 || y <= 0.0) {
                return Err(CliError::EmptyPlot {
                    title: format!("{title}: log-log plot needs positive data, got ({x}, {y})"),
                });
            }
            t.push((transform(x), transform(y)));
        }
        pts_t.push(t);
    }

    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in &pts_t {
        for &(x, y) in t {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
    }
    // degenerate ranges (single point) get symmetric padding
    if xmax - xmin < 1e-12 {
        xmin -= 0.5;
        xmax += 0.5;
    }
    if ymax - ymin < 1e-12 {
        ymin -= 0.5;
        ymax += 0.5;
    }

    let (w, h) = (640.0, 480.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 55.0);
    let sx = |x: f64| ml + (x - xmin) / (xmax - xmin) * (w - ml - mr);
    let sy = |y: f64| h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(svg, "<desc>run {run_id}</desc>");
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        w / 2.0,
        escape(title)
    );
    // axes
    let _ = writeln!(
        svg,
        r#"<line x1="{ml}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
        h - mb,
        w - mr,
        h - mb
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{:.1}" stroke="black"/>"#,
        h - mb
    );
    // ticks
    for i in 0..=4 {
        let fx = xmin + (xmax - xmin) * i as f64 / 4.0;
        let fy = ymin + (ymax - ymin) * i as f64 / 4.0;
        let tick_label = |v: f64| -> String {
            match kind {
                PlotKind::Line => format!("{v:.3}"),
                PlotKind::LogLog => format!("{:.3e}", 10f64.powf(v)),
            }
        };
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
            sx(fx),
            h - mb,
            sx(fx),
            h - mb + 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            sx(fx),
            h - mb + 18.0,
            tick_label(fx)
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
            ml - 5.0,
            sy(fy),
            ml,
            sy(fy)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            ml - 8.0,
            sy(fy) + 4.0,
            tick_label(fy)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        (ml + w - mr) / 2.0,
        h - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        (mt + h - mb) / 2.0,
        (mt + h - mb) / 2.0,
        escape(ylabel)
    );

    for (si, t) in pts_t.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        if t.len() > 1 {
            let path_d: Vec<String> = t
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                path_d.join(" ")
            );
        }
        for &(x, y) in t {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                sx(x),
                sy(y)
            );
        }
        if series.len() > 1 {
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
                w - mr - 110.0,
                mt + 14.0 * (si as f64 + 1.0),
                escape(series[si].label)
            );
        }
    }

    if kind == PlotKind::LogLog && pts_t[0].len() >= 2 {
        // least-squares slope of the first series in log10 coordinates
        let (slope, _) = least_squares_line(&pts_t[0]);
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12">fitted slope {slope:.3}</text>"#,
            ml + 12.0,
            mt + 16.0
        );
    }

    let _ = writeln!(svg, "</svg>");
    fs::write(path, svg).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
