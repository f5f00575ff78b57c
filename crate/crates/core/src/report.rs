//! Report artifacts: co-association analysis, membership tables, and
//! self-contained SVG rendering for frequency overlays and heatmaps.

use crate::dataset::ContingencyRecord;
use crate::spectral::Partition;
use ndarray::Array2;
use std::fmt::Write as _;

/// Fraction of partitions that place each bus pair in the same cluster.
///
/// Diagonal is 1 by convention; the matrix is symmetric with entries in
/// [0, 1].
pub fn co_association(partitions: &[Partition]) -> Array2<f64> {
    assert!(!partitions.is_empty(), "need at least one partition");
    let n = partitions[0].labels.len();
    let mut matrix = Array2::zeros((n, n));
    for partition in partitions {
        for i in 0..n {
            for j in 0..n {
                if partition.labels[i] == partition.labels[j] {
                    matrix[(i, j)] += 1.0;
                }
            }
        }
    }
    matrix /= partitions.len() as f64;
    matrix
}

/// Bus indices ordered by consensus cluster (stable within a cluster),
/// plus the boundary offsets between consecutive clusters.
pub fn cluster_ordering(partition: &Partition) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..partition.labels.len()).collect();
    order.sort_by_key(|&i| (partition.labels[i], i));
    let mut boundaries = Vec::new();
    for idx in 1..order.len() {
        if partition.labels[order[idx]] != partition.labels[order[idx - 1]] {
            boundaries.push(idx);
        }
    }
    (order, boundaries)
}

/// Membership-count table: one row per view partition plus a consensus
/// row, each counting buses per region.
#[derive(Debug, Clone)]
pub struct MembershipTable {
    pub k: usize,
    /// (row label, per-region counts)
    pub rows: Vec<(String, Vec<usize>)>,
}

pub fn membership_table(
    view_ids: &[String],
    per_view: &[Partition],
    consensus: &Partition,
) -> MembershipTable {
    let mut rows: Vec<(String, Vec<usize>)> = view_ids
        .iter()
        .zip(per_view)
        .map(|(id, partition)| (id.clone(), partition.cluster_sizes()))
        .collect();
    rows.push(("consensus".to_string(), consensus.cluster_sizes()));
    MembershipTable {
        k: consensus.k,
        rows,
    }
}

impl MembershipTable {
    /// Render as CSV with a `partition,region_0,...` header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("partition");
        for region in 0..self.k {
            let _ = write!(out, ",region_{region}");
        }
        out.push('\n');
        for (label, counts) in &self.rows {
            out.push_str(label);
            for count in counts {
                let _ = write!(out, ",{count}");
            }
            out.push('\n');
        }
        out
    }
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

/// Cap on polyline vertices per trace; longer traces are strided down.
const MAX_POLYLINE_POINTS: usize = 600;

fn axis_ticks(min: f64, max: f64, count: usize) -> Vec<f64> {
    (0..=count)
        .map(|i| min + (max - min) * i as f64 / count as f64)
        .collect()
}

/// Frequency overlay for one cluster of one contingency: one polyline per
/// member bus, axes in seconds and Hz, everything inline.
pub fn overlay_svg(record: &ContingencyRecord, member_indices: &[usize], title: &str) -> String {
    let width = 900.0;
    let height = 500.0;
    let (left, right, top, bottom) = (75.0, 20.0, 45.0, 55.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;

    let times = &record.traces[0].sample_times;
    let t_min = times.first().copied().unwrap_or(0.0);
    let t_max = times.last().copied().unwrap_or(1.0);

    let mut f_min = f64::INFINITY;
    let mut f_max = f64::NEG_INFINITY;
    for &bus in member_indices {
        for &f in &record.traces[bus].samples {
            f_min = f_min.min(f);
            f_max = f_max.max(f);
        }
    }
    if !f_min.is_finite() || f_min == f_max {
        f_min -= 0.001;
        f_max += 0.001;
    }
    let pad = (f_max - f_min) * 0.05;
    let (f_min, f_max) = (f_min - pad, f_max + pad);

    let x = |t: f64| left + (t - t_min) / (t_max - t_min) * plot_w;
    let y = |f: f64| top + (f_max - f) / (f_max - f_min) * plot_h;

    let mut svg = String::with_capacity(64 * 1024);
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\">\n\
         <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">{title}</text>\n",
        width / 2.0
    );

    // Axes and ticks.
    let _ = write!(
        svg,
        "<g stroke=\"#333\" stroke-width=\"1\">\
         <line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{:.1}\"/>\
         <line x1=\"{left}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\"/></g>\n",
        top + plot_h,
        top + plot_h,
        left + plot_w,
        top + plot_h
    );
    for t in axis_ticks(t_min, t_max, 5) {
        let _ = write!(
            svg,
            "<line x1=\"{0:.1}\" y1=\"{1:.1}\" x2=\"{0:.1}\" y2=\"{2:.1}\" stroke=\"#333\"/>\
             <text x=\"{0:.1}\" y=\"{3:.1}\" font-size=\"11\" text-anchor=\"middle\">{t:.1}</text>\n",
            x(t),
            top + plot_h,
            top + plot_h + 5.0,
            top + plot_h + 18.0
        );
    }
    for f in axis_ticks(f_min, f_max, 5) {
        let _ = write!(
            svg,
            "<line x1=\"{1:.1}\" y1=\"{0:.1}\" x2=\"{left}\" y2=\"{0:.1}\" stroke=\"#333\"/>\
             <text x=\"{2:.1}\" y=\"{3:.1}\" font-size=\"11\" text-anchor=\"end\">{f:.4}</text>\n",
            y(f),
            left - 5.0,
            left - 8.0,
            y(f) + 4.0
        );
    }
    let _ = write!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">time (s)</text>\n\
         <text x=\"18\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\" \
         transform=\"rotate(-90 18 {:.1})\">frequency (Hz)</text>\n",
        left + plot_w / 2.0,
        height - 12.0,
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );

    let stride = times.len().div_ceil(MAX_POLYLINE_POINTS).max(1);
    for (line_idx, &bus) in member_indices.iter().enumerate() {
        let color = PALETTE[line_idx % PALETTE.len()];
        let trace = &record.traces[bus];
        let mut points = String::new();
        for (idx, (&t, &f)) in times.iter().zip(&trace.samples).enumerate() {
            if idx % stride != 0 && idx != times.len() - 1 {
                continue;
            }
            let _ = write!(points, "{:.2},{:.2} ", x(t), y(f));
        }
        let _ = write!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1\" \
             stroke-opacity=\"0.85\" points=\"{}\"><title>{}</title></polyline>\n",
            points.trim_end(),
            trace.bus_id
        );
    }

    svg.push_str("</svg>\n");
    svg
}

fn heat_color(value: f64) -> String {
    let v = value.clamp(0.0, 1.0);
    // White to dark blue.
    let lerp = |a: f64, b: f64| (a + (b - a) * v).round() as u8;
    format!(
        "rgb({},{},{})",
        lerp(255.0, 8.0),
        lerp(255.0, 48.0),
        lerp(255.0, 107.0)
    )
}

/// Co-association heatmap with rows and columns ordered by consensus
/// cluster and boundaries marked.
pub fn heatmap_svg(
    matrix: &Array2<f64>,
    ordering: &[usize],
    boundaries: &[usize],
    title: &str,
) -> String {
    let n = ordering.len();
    let plot = 620.0;
    let (left, top) = (60.0, 50.0);
    let cell = plot / n as f64;
    let width = left + plot + 90.0;
    let height = top + plot + 40.0;

    let mut svg = String::with_capacity(n * n * 48 + 4096);
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\">\n\
         <rect width=\"{width:.0}\" height=\"{height:.0}\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"28\" font-size=\"16\" text-anchor=\"middle\">{title}</text>\n",
        left + plot / 2.0
    );

    for (row, &i) in ordering.iter().enumerate() {
        for (col, &j) in ordering.iter().enumerate() {
            let _ = write!(
                svg,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>\n",
                left + col as f64 * cell,
                top + row as f64 * cell,
                cell + 0.5,
                cell + 0.5,
                heat_color(matrix[(i, j)])
            );
        }
    }

    for &boundary in boundaries {
        let offset = boundary as f64 * cell;
        let _ = write!(
            svg,
            "<line x1=\"{left}\" y1=\"{0:.2}\" x2=\"{1:.2}\" y2=\"{0:.2}\" stroke=\"#d62728\" stroke-width=\"1.5\"/>\n\
             <line x1=\"{2:.2}\" y1=\"{top}\" x2=\"{2:.2}\" y2=\"{3:.2}\" stroke=\"#d62728\" stroke-width=\"1.5\"/>\n",
            top + offset,
            left + plot,
            left + offset,
            top + plot
        );
    }

    // Minimal color key.
    let key_x = left + plot + 20.0;
    for step in 0..=20 {
        let v = 1.0 - step as f64 / 20.0;
        let _ = write!(
            svg,
            "<rect x=\"{key_x:.1}\" y=\"{:.1}\" width=\"18\" height=\"{:.2}\" fill=\"{}\"/>\n",
            top + step as f64 * plot / 21.0,
            plot / 21.0 + 0.5,
            heat_color(v)
        );
    }
    let _ = write!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\">1.0</text>\n\
         <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\">0.0</text>\n",
        key_x + 24.0,
        top + 10.0,
        key_x + 24.0,
        top + plot
    );

    svg.push_str("</svg>\n");
    svg
}
