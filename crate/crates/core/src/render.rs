//! Overlay renders and metric tables for human inspection.

use serde::{Deserialize, Serialize};

use crate::data::{FrameImage, Mask};
use crate::error::{Error, Result};
use crate::metrics::{CategoryCounts, EvalReport, MetricRow};

pub const GT_AMODAL_COLOR: [f64; 3] = [0.0, 1.0, 0.0];
pub const GT_VISIBLE_COLOR: [f64; 3] = [1.0, 0.0, 0.0];
pub const PREDICTION_COLOR: [f64; 3] = [1.0, 0.0, 1.0];

#[derive(Debug, Clone, Copy)]
pub struct OverlayLayer<'a> {
    pub mask: &'a Mask,
    pub color: [f64; 3],
    pub opacity: f64,
}

/// Blends each layer over the frame in order: `out = (1−o)·out + o·color`
/// on the layer's mask pixels.
pub fn render_overlay(frame: &FrameImage, layers: &[OverlayLayer<'_>]) -> Result<FrameImage> {
    let mut out = frame.clone();
    for layer in layers {
        if layer.mask.dims() != frame.dims() {
            return Err(Error::geometry(
                format!("{}x{}", frame.width(), frame.height()),
                format!("{}x{} overlay mask", layer.mask.width(), layer.mask.height()),
            ));
        }
        if !(0.0..=1.0).contains(&layer.opacity) {
            return Err(Error::InvalidInput(format!("opacity {} outside [0,1]", layer.opacity)));
        }
        let o = layer.opacity;
        for (x, y) in layer.mask.iter_true() {
            let p = out.get(x, y);
            out.set(x, y, std::array::from_fn(|k| (1.0 - o) * p[k] + o * layer.color[k]));
        }
    }
    Ok(out)
}

pub const METRIC_COLUMNS: [&str; 4] = ["Mean IoU", "Occlusion IoU", "Full Occlusion IoU", "Non Visible Pixel IoU"];
pub const COUNT_COLUMNS: [&str; 4] = ["Images", "Occluded Frames", "Heavily Occluded Frames", "Fully Occluded Frames"];
pub const ABSENT: &str = "—";

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| ABSENT.to_string(), |v| format!("{v:.3}"))
}

fn table(header: &[&str], rows: &[(String, Vec<String>)]) -> String {
    let label_w = rows.iter().map(|(l, _)| l.chars().count()).max().unwrap_or(0);
    let widths: Vec<usize> = header
        .iter()
        .enumerate()
        .map(|(i, h)| {
            rows.iter()
                .map(|(_, c)| c[i].chars().count())
                .chain(std::iter::once(h.chars().count()))
                .max()
                .unwrap()
        })
        .collect();
    let pad = |s: &str, w: usize| format!("{s}{}", " ".repeat(w - s.chars().count()));
    let mut out = String::new();
    out.push_str(&pad("", label_w));
    for (h, w) in header.iter().zip(&widths) {
        out.push_str(" | ");
        out.push_str(&pad(h, *w));
    }
    out.push('\n');
    out.push_str(&"-".repeat(label_w));
    for w in &widths {
        out.push_str("-|-");
        out.push_str(&"-".repeat(*w));
    }
    out.push('\n');
    for (label, cells) in rows {
        out.push_str(&pad(label, label_w));
        for (c, w) in cells.iter().zip(&widths) {
            out.push_str(" | ");
            out.push_str(&pad(c, *w));
        }
        out.push('\n');
    }
    out
}

/// The JSON side of a rendered report table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub label: String,
    pub metrics: MetricRow,
    pub counts: CategoryCounts,
}

/// Text table with one row of metric columns; absent aggregates print as "—".
pub fn metric_table(label: &str, row: &MetricRow) -> String {
    let cells = vec![
        cell(row.mean_iou),
        cell(row.occlusion_iou),
        cell(row.full_occlusion_iou),
        cell(row.non_visible_pixel_iou),
    ];
    table(&METRIC_COLUMNS, &[(label.to_string(), cells)])
}

pub fn counts_table(label: &str, scenes: usize, counts: &CategoryCounts) -> String {
    let mut header = vec!["Scenes"];
    header.extend(COUNT_COLUMNS);
    let cells = vec![
        scenes.to_string(),
        counts.frames.to_string(),
        counts.occluded.to_string(),
        counts.heavily_occluded.to_string(),
        counts.fully_occluded.to_string(),
    ];
    table(&header, &[(label.to_string(), cells)])
}

pub fn emit_report_table(label: &str, report: &EvalReport) -> (String, ReportTable) {
    let row = MetricRow::from(report);
    (
        metric_table(label, &row),
        ReportTable {
            label: label.to_string(),
            metrics: row,
            counts: report.counts,
        },
    )
}
