//! Heatmap grids and a deterministic SVG renderer.
//!
//! Rows are dataset sizes (increasing downward), columns are checkpoint
//! epochs (increasing rightward); each cell holds the trial-mean of a metric.
//! The color scale is a linear blue-to-red map over [min, max] (or explicit
//! bounds), with the bounds recorded in the SVG metadata so absolute values
//! stay recoverable from the rendered file.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::util::fmt_f64;

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapGrid {
    /// Row labels (dataset sizes), strictly increasing.
    pub rows: Vec<usize>,
    /// Column labels (epochs), strictly increasing.
    pub cols: Vec<usize>,
    /// `cells[r][c]`, all finite.
    pub cells: Vec<Vec<f64>>,
}

impl HeatmapGrid {
    pub fn new(rows: Vec<usize>, cols: Vec<usize>, cells: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() || cols.is_empty() {
            return Err(Error::InvalidArgument("HeatmapGrid: empty grid".into()));
        }
        if rows.windows(2).any(|w| w[0] >= w[1]) || cols.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "HeatmapGrid: labels must be strictly increasing".into(),
            ));
        }
        if cells.len() != rows.len() || cells.iter().any(|r| r.len() != cols.len()) {
            return Err(Error::InvalidArgument(format!(
                "HeatmapGrid: expected {}x{} cells",
                rows.len(),
                cols.len()
            )));
        }
        for (r, row) in cells.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        op: "HeatmapGrid::new",
                        what: "cell",
                        value: *v,
                        index: r * cols.len() + c,
                    });
                }
            }
        }
        Ok(HeatmapGrid { rows, cols, cells })
    }

    pub fn min_max(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in self.cells.iter().flatten() {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
        (lo, hi)
    }

    /// CSV with a header row of column labels; first column holds row labels.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n");
        for c in &self.cols {
            let _ = write!(out, ",{c}");
        }
        out.push('\n');
        for (r, label) in self.rows.iter().enumerate() {
            let _ = write!(out, "{label}");
            for v in &self.cells[r] {
                let _ = write!(out, ",{}", fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, origin: &str) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::ParseFile {
            path: origin.to_string(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty file".into()))?;
        let cols: Vec<usize> = header
            .split(',')
            .skip(1)
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|e| parse_err(1, format!("bad column label {t:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        if cols.is_empty() {
            return Err(parse_err(1, "no column labels".into()));
        }
        let mut rows = Vec::new();
        let mut cells = Vec::new();
        for (ln, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let label = fields
                .next()
                .ok_or_else(|| parse_err(ln + 1, "missing row label".into()))?;
            rows.push(
                label
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| parse_err(ln + 1, format!("bad row label {label:?}: {e}")))?,
            );
            let row: Vec<f64> = fields
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|e| parse_err(ln + 1, format!("bad cell {t:?}: {e}")))
                })
                .collect::<Result<_>>()?;
            if row.len() != cols.len() {
                return Err(parse_err(
                    ln + 1,
                    format!("expected {} cells, got {}", cols.len(), row.len()),
                ));
            }
            cells.push(row);
        }
        HeatmapGrid::new(rows, cols, cells)
    }
}

#[derive(Debug, Clone, Default)]
pub struct HeatmapStyle {
    pub title: Option<String>,
    /// Explicit color-scale bounds; defaults to the grid's min/max.
    pub bounds: Option<(f64, f64)>,
}

/// Position in [0,1] on the blue-to-red scale. A degenerate scale
/// (min == max) maps everything to the midpoint.
fn scale_position(v: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
    } else {
        0.5
    }
}

fn color(t: f64) -> (u8, u8, u8) {
    let r = (255.0 * t).round() as u8;
    let b = (255.0 * (1.0 - t)).round() as u8;
    (r, 0, b)
}

const CELL: usize = 26;
const MARGIN_LEFT: usize = 64;
const MARGIN_TOP: usize = 34;
const MARGIN_BOTTOM: usize = 30;
const MARGIN_RIGHT: usize = 12;

/// Render to SVG: one rectangle per cell, labeled axes, and the color-scale
/// bounds embedded in the metadata. Output bytes are fixed by the input.
pub fn render_heatmap(grid: &HeatmapGrid, style: &HeatmapStyle) -> Result<String> {
    let (auto_lo, auto_hi) = grid.min_max();
    let (lo, hi) = style.bounds.unwrap_or((auto_lo, auto_hi));
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument(
            "render_heatmap: bounds must be finite".into(),
        ));
    }
    let width = MARGIN_LEFT + grid.cols.len() * CELL + MARGIN_RIGHT;
    let height = MARGIN_TOP + grid.rows.len() * CELL + MARGIN_BOTTOM;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(
        svg,
        "  <metadata>reluscope-heatmap scale-min={} scale-max={} rows={} cols={}</metadata>",
        fmt_f64(lo),
        fmt_f64(hi),
        grid.rows.len(),
        grid.cols.len()
    );
    let _ = writeln!(
        svg,
        r#"  <rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#
    );
    if let Some(title) = &style.title {
        let _ = writeln!(
            svg,
            r#"  <text x="{}" y="20" font-family="monospace" font-size="13" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + grid.cols.len() * CELL / 2,
            xml_escape(title)
        );
    }
    for (r, row) in grid.cells.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            let (red, green, blue) = color(scale_position(*v, lo, hi));
            let _ = writeln!(
                svg,
                r#"  <rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="rgb({red},{green},{blue})"/>"#,
                MARGIN_LEFT + c * CELL,
                MARGIN_TOP + r * CELL
            );
        }
    }
    for (r, label) in grid.rows.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"  <text x="{}" y="{}" font-family="monospace" font-size="10" text-anchor="end">{label}</text>"#,
            MARGIN_LEFT - 6,
            MARGIN_TOP + r * CELL + CELL / 2 + 3
        );
    }
    for (c, label) in grid.cols.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"  <text x="{}" y="{}" font-family="monospace" font-size="10" text-anchor="middle">{label}</text>"#,
            MARGIN_LEFT + c * CELL + CELL / 2,
            MARGIN_TOP + grid.rows.len() * CELL + 14
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
