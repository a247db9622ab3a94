//! Deterministic SVG rendering of report figures.
//!
//! Plots are renderings of the report (plus the persisted density grids for
//! contours), never recomputations: identical inputs produce byte-identical
//! files. Emitted per group: an item map with centers and density contours,
//! a cluster-count histogram, and a student map colored by membership; plus
//! one positive-proportion profile across groups.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::latent::Point;
use crate::ns::{DensityGrid, StudentCluster};
use crate::report::{AnalysisReport, GroupReport};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 640.0;
const MARGIN: f64 = 48.0;

/// Fixed qualitative palette; membership colors cycle through it.
const PALETTE: [&str; 10] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
    "#2b8cbe", "#c51b8a",
];

/// Fixed-precision float formatting so output is reproducible byte-for-byte.
fn fmt(v: f64) -> String {
    let s = format!("{v:.4}");
    if s == "-0.0000" {
        "0.0000".to_string()
    } else {
        s
    }
}

#[derive(Clone, Copy)]
struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    width: f64,
    height: f64,
}

impl Frame {
    fn around(points: impl Iterator<Item = Point>) -> Self {
        let mut x0 = f64::INFINITY;
        let mut x1 = f64::NEG_INFINITY;
        let mut y0 = f64::INFINITY;
        let mut y1 = f64::NEG_INFINITY;
        for p in points {
            x0 = x0.min(p[0]);
            x1 = x1.max(p[0]);
            y0 = y0.min(p[1]);
            y1 = y1.max(p[1]);
        }
        if !x0.is_finite() || x1 - x0 == 0.0 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if !y0.is_finite() || y1 - y0 == 0.0 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let pad_x = 0.05 * (x1 - x0);
        let pad_y = 0.05 * (y1 - y0);
        Self {
            x0: x0 - pad_x,
            x1: x1 + pad_x,
            y0: y0 - pad_y,
            y1: y1 + pad_y,
            width: WIDTH,
            height: HEIGHT,
        }
    }

    fn sx(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (self.width - 2.0 * MARGIN)
    }

    fn sy(&self, y: f64) -> f64 {
        // y grows upward in data space, downward in SVG space
        MARGIN + (self.y1 - y) / (self.y1 - self.y0) * (self.height - 2.0 * MARGIN)
    }
}

fn svg_open(out: &mut String, title: &str) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<title>{title}</title>\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    );
}

/// Marching squares: line segments of the iso-contour at `level`.
fn contour_segments(grid: &DensityGrid, level: f64) -> Vec<(Point, Point)> {
    let nx = grid.nx();
    let ny = grid.ny();
    let v = |ix: usize, iy: usize| grid.values[iy * nx + ix];
    // linear interpolation of the crossing point along one cell edge
    let lerp = |a: f64, b: f64, pa: Point, pb: Point| -> Point {
        let t = if (b - a).abs() < 1e-300 {
            0.5
        } else {
            ((level - a) / (b - a)).clamp(0.0, 1.0)
        };
        [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
    };
    let mut segments = Vec::new();
    for iy in 0..ny - 1 {
        for ix in 0..nx - 1 {
            let corners = [
                [grid.xs[ix], grid.ys[iy]],
                [grid.xs[ix + 1], grid.ys[iy]],
                [grid.xs[ix + 1], grid.ys[iy + 1]],
                [grid.xs[ix], grid.ys[iy + 1]],
            ];
            let values = [v(ix, iy), v(ix + 1, iy), v(ix + 1, iy + 1), v(ix, iy + 1)];
            let mut case = 0usize;
            for (bit, val) in values.iter().enumerate() {
                if *val >= level {
                    case |= 1 << bit;
                }
            }
            if case == 0 || case == 15 {
                continue;
            }
            let edge = |a: usize, b: usize| lerp(values[a], values[b], corners[a], corners[b]);
            let mut push = |e1: Point, e2: Point| segments.push((e1, e2));
            match case {
                1 | 14 => push(edge(0, 1), edge(0, 3)),
                2 | 13 => push(edge(0, 1), edge(1, 2)),
                3 | 12 => push(edge(0, 3), edge(1, 2)),
                4 | 11 => push(edge(1, 2), edge(2, 3)),
                6 | 9 => push(edge(0, 1), edge(2, 3)),
                7 | 8 => push(edge(0, 3), edge(2, 3)),
                5 => {
                    push(edge(0, 1), edge(0, 3));
                    push(edge(1, 2), edge(2, 3));
                }
                10 => {
                    push(edge(0, 1), edge(1, 2));
                    push(edge(0, 3), edge(2, 3));
                }
                _ => unreachable!(),
            }
        }
    }
    segments
}

fn draw_contours(out: &mut String, grid: &DensityGrid, frame: &Frame) {
    let peak = grid.max();
    if !(peak > 0.0) {
        return;
    }
    for (i, frac) in [0.2, 0.4, 0.6, 0.8].iter().enumerate() {
        let mut d = String::new();
        for (a, b) in contour_segments(grid, frac * peak) {
            let _ = write!(
                d,
                "M{} {} L{} {} ",
                fmt(frame.sx(a[0])),
                fmt(frame.sy(a[1])),
                fmt(frame.sx(b[0])),
                fmt(frame.sy(b[1]))
            );
        }
        if !d.is_empty() {
            let _ = write!(
                out,
                "<path class=\"contour contour-{i}\" d=\"{}\" fill=\"none\" \
                 stroke=\"#bbbbbb\" stroke-width=\"0.7\"/>\n",
                d.trim_end()
            );
        }
    }
}

fn draw_centers(out: &mut String, labels: &[String], centers: &[Point], frame: &Frame) {
    for (label, c) in labels.iter().zip(centers) {
        let _ = write!(
            out,
            "<text class=\"center-glyph\" x=\"{}\" y=\"{}\" font-size=\"18\" \
             font-family=\"sans-serif\" font-weight=\"bold\" text-anchor=\"middle\" \
             fill=\"#d62728\">{label}</text>\n",
            fmt(frame.sx(c[0])),
            fmt(frame.sy(c[1]))
        );
    }
}

/// Item interaction map: item positions, adjusted centers, density contours.
pub fn render_item_map(group: &GroupReport, density: Option<&DensityGrid>) -> String {
    let sol = &group.cluster.solution;
    let frame = Frame::around(
        group
            .item_positions
            .points()
            .iter()
            .copied()
            .chain(sol.centers.iter().copied()),
    );
    let mut out = String::new();
    svg_open(&mut out, &format!("Item interaction map: {}", group.label));
    if let Some(grid) = density {
        draw_contours(&mut out, grid, &frame);
    }
    for (id, p) in group.item_positions.iter() {
        let _ = write!(
            out,
            "<circle class=\"item\" cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"#333333\"/>\n\
             <text x=\"{}\" y=\"{}\" font-size=\"9\" font-family=\"sans-serif\" \
             fill=\"#333333\">{id}</text>\n",
            fmt(frame.sx(p[0])),
            fmt(frame.sy(p[1])),
            fmt(frame.sx(p[0]) + 4.0),
            fmt(frame.sy(p[1]) - 4.0)
        );
    }
    draw_centers(&mut out, &sol.center_labels, &sol.centers, &frame);
    out.push_str("</svg>\n");
    out
}

/// Student map colored by cluster membership, with centers and midpoint.
pub fn render_student_map(group: &GroupReport) -> String {
    let sol = &group.cluster.solution;
    let frame = Frame::around(
        group
            .student_positions
            .points()
            .iter()
            .copied()
            .chain(sol.centers.iter().copied())
            .chain(std::iter::once(sol.midpoint)),
    );
    let mut out = String::new();
    svg_open(&mut out, &format!("Student map: {}", group.label));
    for (p, membership) in group
        .student_positions
        .points()
        .iter()
        .zip(&sol.student_memberships)
    {
        let color = match membership {
            StudentCluster::Center(j) => PALETTE[j % PALETTE.len()],
            StudentCluster::Midpoint => "#aaaaaa",
        };
        let _ = write!(
            out,
            "<circle class=\"student\" cx=\"{}\" cy=\"{}\" r=\"2.5\" fill=\"{color}\" \
             fill-opacity=\"0.7\"/>\n",
            fmt(frame.sx(p[0])),
            fmt(frame.sy(p[1]))
        );
    }
    draw_centers(&mut out, &sol.center_labels, &sol.centers, &frame);
    let _ = write!(
        out,
        "<text class=\"midpoint-glyph\" x=\"{}\" y=\"{}\" font-size=\"18\" \
         font-family=\"sans-serif\" font-weight=\"bold\" text-anchor=\"middle\" \
         fill=\"#000000\">M</text>\n",
        fmt(frame.sx(sol.midpoint[0])),
        fmt(frame.sy(sol.midpoint[1]))
    );
    out.push_str("</svg>\n");
    out
}

/// Distribution of the center count over the ensemble.
pub fn render_histogram(group: &GroupReport) -> String {
    let hist = &group.cluster.histogram;
    let mut out = String::new();
    svg_open(
        &mut out,
        &format!("Cluster count distribution: {}", group.label),
    );
    let max_count = hist.values().copied().max().unwrap_or(1) as f64;
    let n_bars = hist.len() as f64;
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let bar_w = plot_w / n_bars;
    for (idx, (m, count)) in hist.iter().enumerate() {
        let h = *count as f64 / max_count * plot_h;
        let x = MARGIN + idx as f64 * bar_w;
        let y = MARGIN + plot_h - h;
        let _ = write!(
            out,
            "<rect class=\"bar\" data-m=\"{m}\" data-count=\"{count}\" x=\"{}\" y=\"{}\" \
             width=\"{}\" height=\"{}\" fill=\"#4c78a8\"/>\n\
             <text x=\"{}\" y=\"{}\" font-size=\"12\" font-family=\"sans-serif\" \
             text-anchor=\"middle\">{m}</text>\n",
            fmt(x + 0.1 * bar_w),
            fmt(y),
            fmt(0.8 * bar_w),
            fmt(h),
            fmt(x + 0.5 * bar_w),
            fmt(MARGIN + plot_h + 16.0)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Per-item positive-proportion profile, one polyline per group.
pub fn render_proportions(report: &AnalysisReport) -> String {
    let mut out = String::new();
    svg_open(&mut out, "Positive response proportions");
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let n_items = report
        .groups
        .first()
        .map(|g| g.item_ids.len())
        .unwrap_or(0)
        .max(2);
    for (gi, group) in report.groups.iter().enumerate() {
        let color = PALETTE[gi % PALETTE.len()];
        let mut points = String::new();
        for (i, prop) in group.positive_proportions.iter().enumerate() {
            if let Some(p) = prop {
                let x = MARGIN + i as f64 / (n_items - 1) as f64 * plot_w;
                let y = MARGIN + (1.0 - p) * plot_h;
                let _ = write!(points, "{},{} ", fmt(x), fmt(y));
            }
        }
        let _ = write!(
            out,
            "<polyline class=\"profile\" data-group=\"{}\" points=\"{}\" fill=\"none\" \
             stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            group.label,
            points.trim_end()
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Write every figure for the report; `densities` pairs with
/// `report.groups`. Returns the created file paths.
pub fn emit_plots(
    report: &AnalysisReport,
    densities: &[Option<DensityGrid>],
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let mut emit = |name: String, content: String| -> Result<()> {
        let path = out_dir.join(name);
        std::fs::write(&path, content)?;
        written.push(path);
        Ok(())
    };
    for (gi, group) in report.groups.iter().enumerate() {
        let density = densities.get(gi).and_then(|d| d.as_ref());
        emit(
            format!("item_map_{}.svg", group.label),
            render_item_map(group, density),
        )?;
        emit(
            format!("student_map_{}.svg", group.label),
            render_student_map(group),
        )?;
        emit(
            format!("cluster_histogram_{}.svg", group.label),
            render_histogram(group),
        )?;
    }
    emit("positive_proportions.svg".to_string(), render_proportions(report))?;
    Ok(written)
}
