//! Minimal self-contained SVG emitters. CSV is the source of truth; these
//! are a convenience for eyeballing runs without a plotting stack.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::initgen::Histogram2d;

const SIZE: f64 = 560.0;
const MARGIN: f64 = 40.0;

/// Heatmap of an eigenvalue histogram with the unit circle overlaid.
pub fn write_histogram_svg(hist: &Histogram2d, title: &str, path: &Path) -> Result<()> {
    let grid = &hist.grid;
    let peak = hist.counts.iter().copied().max().unwrap_or(1).max(1) as f64;
    let plot = SIZE - 2.0 * MARGIN;
    let cell_w = plot / grid.re_bins as f64;
    let cell_h = plot / grid.im_bins as f64;

    let mut out = svg_open(title);
    for i in 0..grid.re_bins {
        for j in 0..grid.im_bins {
            let count = hist.count(i, j);
            if count == 0 {
                continue;
            }
            // Log intensity keeps the low-count halo visible.
            let intensity = ((count as f64).ln_1p() / peak.ln_1p()).clamp(0.0, 1.0);
            let shade = (255.0 * (1.0 - intensity)) as u8;
            let x = MARGIN + i as f64 * cell_w;
            // SVG y grows downward; put im_max at the top.
            let y = MARGIN + (grid.im_bins - 1 - j) as f64 * cell_h;
            let _ = write!(
                out,
                r##"<rect x="{x:.2}" y="{y:.2}" width="{cell_w:.2}" height="{cell_h:.2}" fill="rgb({shade},{shade},255)"/>"##
            );
        }
    }
    // Unit circle in data coordinates.
    let sx = plot / (grid.re_max - grid.re_min);
    let sy = plot / (grid.im_max - grid.im_min);
    let cx = MARGIN + (0.0 - grid.re_min) * sx;
    let cy = MARGIN + (grid.im_max - 0.0) * sy;
    let _ = write!(
        out,
        r##"<ellipse cx="{cx:.2}" cy="{cy:.2}" rx="{:.2}" ry="{:.2}" fill="none" stroke="black" stroke-dasharray="6,4"/>"##,
        sx, sy
    );
    svg_close(&mut out);
    std::fs::write(path, out)?;
    Ok(())
}

/// Line plot of (x, y) series, one polyline per labelled series.
pub fn write_lines_svg(series: &[(String, Vec<(f64, f64)>)], title: &str, path: &Path) -> Result<()> {
    let points = series.iter().flat_map(|(_, pts)| pts.iter());
    let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in points {
        x_lo = x_lo.min(*x);
        x_hi = x_hi.max(*x);
        y_lo = y_lo.min(*y);
        y_hi = y_hi.max(*y);
    }
    if !x_lo.is_finite() || x_hi <= x_lo {
        x_lo = 0.0;
        x_hi = 1.0;
    }
    if !y_lo.is_finite() || y_hi <= y_lo {
        y_lo = 0.0;
        y_hi = 1.0;
    }

    const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let plot = SIZE - 2.0 * MARGIN;
    let to_px = |x: f64, y: f64| {
        (
            MARGIN + (x - x_lo) / (x_hi - x_lo) * plot,
            MARGIN + (y_hi - y) / (y_hi - y_lo) * plot,
        )
    };

    let mut out = svg_open(title);
    for (idx, (label, pts)) in series.iter().enumerate() {
        if pts.is_empty() {
            continue;
        }
        let color = PALETTE[idx % PALETTE.len()];
        let path_points: Vec<String> = pts
            .iter()
            .map(|(x, y)| {
                let (px, py) = to_px(*x, *y);
                format!("{px:.2},{py:.2}")
            })
            .collect();
        let _ = write!(
            out,
            r##"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"##,
            path_points.join(" ")
        );
        let _ = write!(
            out,
            r##"<text x="{:.2}" y="{:.2}" font-size="12" fill="{color}">{label}</text>"##,
            SIZE - MARGIN - 150.0,
            MARGIN + 16.0 * (idx + 1) as f64
        );
    }
    svg_close(&mut out);
    std::fs::write(path, out)?;
    Ok(())
}

fn svg_open(title: &str) -> String {
    let mut out = String::with_capacity(16 * 1024);
    let _ = write!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}"><rect width="100%" height="100%" fill="white"/><text x="{MARGIN}" y="24" font-size="14">{title}</text>"##
    );
    out
}

fn svg_close(out: &mut String) {
    out.push_str("</svg>\n");
}
