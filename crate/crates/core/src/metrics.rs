//! Amodal segmentation metrics: plain IoU against the amodal ground truth,
//! restricted to occluded or fully occluded frames, and IoU over hidden
//! pixels only.

use serde::{Deserialize, Serialize};

use crate::data::{Mask, MaskSequence};
use crate::error::{Error, Result};

/// `|a ∩ b| / |a ∪ b|`; `None` when both masks are empty.
pub fn iou(a: &Mask, b: &Mask) -> Result<Option<f64>> {
    if a.dims() != b.dims() {
        return Err(Error::geometry(
            format!("{}x{}", a.width(), a.height()),
            format!("{}x{}", b.width(), b.height()),
        ));
    }
    let (inter, union) = a
        .bits()
        .iter()
        .zip(b.bits())
        .fold((0usize, 0usize), |(i, u), (&p, &q)| (i + usize::from(p && q), u + usize::from(p || q)));
    Ok((union > 0).then(|| inter as f64 / union as f64))
}

/// IoU after removing ground-truth visible pixels from both prediction and
/// amodal ground truth. `None` when nothing is hidden.
pub fn non_visible_pixel_iou(pred: &Mask, gt_amodal: &Mask, gt_visible: &Mask) -> Result<Option<f64>> {
    if !gt_visible.is_subset_of(gt_amodal)? {
        return Err(Error::InvalidInput("ground-truth visible mask is not inside the amodal mask".into()));
    }
    let hidden = gt_amodal.and_not(gt_visible)?;
    if hidden.is_empty() {
        return Ok(None);
    }
    iou(&pred.and_not(gt_visible)?, &hidden)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameEval {
    pub frame: usize,
    /// Amodal IoU; `None` for frames skipped because the ground truth is empty.
    pub iou: Option<f64>,
    pub non_visible_iou: Option<f64>,
    /// `1 − |visible| / |amodal|`, `None` for empty ground truth.
    pub occlusion_fraction: Option<f64>,
    pub occluded: bool,
    pub heavily_occluded: bool,
    pub fully_occluded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub frames: usize,
    pub occluded: usize,
    pub heavily_occluded: usize,
    pub fully_occluded: usize,
}

impl std::ops::AddAssign for CategoryCounts {
    fn add_assign(&mut self, o: Self) {
        self.frames += o.frames;
        self.occluded += o.occluded;
        self.heavily_occluded += o.heavily_occluded;
        self.fully_occluded += o.fully_occluded;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean_iou: Option<f64>,
    pub occlusion_iou: Option<f64>,
    pub full_occlusion_iou: Option<f64>,
    pub non_visible_pixel_iou: Option<f64>,
    pub counts: CategoryCounts,
    pub frames: Vec<FrameEval>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Occlusion category flags; `None` for an empty amodal mask.
pub fn frame_categories(gt_amodal: &Mask, gt_visible: &Mask) -> Result<Option<(f64, bool, bool, bool)>> {
    let amodal = gt_amodal.area();
    if amodal == 0 {
        return Ok(None);
    }
    let visible = gt_visible.intersection_area(gt_amodal)?;
    let fraction = 1.0 - visible as f64 / amodal as f64;
    let occluded = visible < amodal;
    let heavily = fraction > 0.5;
    let fully = visible == 0;
    Ok(Some((fraction, occluded, heavily, fully)))
}

pub fn evaluate_frame(frame: usize, pred: &Mask, gt_amodal: &Mask, gt_visible: &Mask) -> Result<FrameEval> {
    let Some((fraction, occluded, heavily, fully)) = frame_categories(gt_amodal, gt_visible)? else {
        if pred.dims() != gt_amodal.dims() || gt_visible.dims() != gt_amodal.dims() {
            return Err(Error::geometry(
                format!("{}x{}", gt_amodal.width(), gt_amodal.height()),
                format!("{}x{}", pred.width(), pred.height()),
            ));
        }
        return Ok(FrameEval {
            frame,
            iou: None,
            non_visible_iou: None,
            occlusion_fraction: None,
            occluded: false,
            heavily_occluded: false,
            fully_occluded: false,
        });
    };
    Ok(FrameEval {
        frame,
        iou: iou(pred, gt_amodal)?,
        non_visible_iou: non_visible_pixel_iou(pred, gt_amodal, gt_visible)?,
        occlusion_fraction: Some(fraction),
        occluded,
        heavily_occluded: heavily,
        fully_occluded: fully,
    })
}

fn check_lengths(a: &MaskSequence, b: &MaskSequence, what: &str) -> Result<()> {
    if a.geometry() != b.geometry() {
        return Err(Error::geometry(a.geometry(), format!("{} ({what})", b.geometry())));
    }
    Ok(())
}

fn report_from_frames(frames: Vec<FrameEval>) -> EvalReport {
    let scored = || frames.iter().filter(|f| f.iou.is_some());
    let mut counts = CategoryCounts::default();
    for f in &frames {
        counts.frames += 1;
        counts.occluded += usize::from(f.occluded);
        counts.heavily_occluded += usize::from(f.heavily_occluded);
        counts.fully_occluded += usize::from(f.fully_occluded);
    }
    EvalReport {
        mean_iou: mean(scored().filter_map(|f| f.iou)),
        occlusion_iou: mean(scored().filter(|f| f.occluded).filter_map(|f| f.iou)),
        full_occlusion_iou: mean(scored().filter(|f| f.fully_occluded).filter_map(|f| f.iou)),
        non_visible_pixel_iou: mean(scored().filter_map(|f| f.non_visible_iou)),
        counts,
        frames,
    }
}

/// Scores one sequence. Frames with empty amodal ground truth are excluded
/// from every aggregate.
pub fn evaluate_sequence(pred: &MaskSequence, gt_amodal: &MaskSequence, gt_visible: &MaskSequence) -> Result<EvalReport> {
    check_lengths(gt_amodal, pred, "prediction")?;
    check_lengths(gt_amodal, gt_visible, "ground-truth visible")?;
    let frames = (0..pred.len())
        .map(|i| evaluate_frame(i, pred.get(i), gt_amodal.get(i), gt_visible.get(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(report_from_frames(frames))
}

/// Category counts alone, for dataset statistics.
pub fn sequence_counts(gt_amodal: &MaskSequence, gt_visible: &MaskSequence) -> Result<CategoryCounts> {
    check_lengths(gt_amodal, gt_visible, "ground-truth visible")?;
    let mut counts = CategoryCounts::default();
    for (a, v) in gt_amodal.masks().iter().zip(gt_visible.masks()) {
        counts.frames += 1;
        if let Some((_, occluded, heavily, fully)) = frame_categories(a, v)? {
            counts.occluded += usize::from(occluded);
            counts.heavily_occluded += usize::from(heavily);
            counts.fully_occluded += usize::from(fully);
        }
    }
    Ok(counts)
}

/// Aggregates over several sequences, both as a mean of per-sequence means
/// and pooled over all qualifying frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub sequences: usize,
    pub per_sequence_mean: MetricRow,
    pub pooled_frames: MetricRow,
    pub counts: CategoryCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricRow {
    pub mean_iou: Option<f64>,
    pub occlusion_iou: Option<f64>,
    pub full_occlusion_iou: Option<f64>,
    pub non_visible_pixel_iou: Option<f64>,
}

impl From<&EvalReport> for MetricRow {
    fn from(r: &EvalReport) -> Self {
        Self {
            mean_iou: r.mean_iou,
            occlusion_iou: r.occlusion_iou,
            full_occlusion_iou: r.full_occlusion_iou,
            non_visible_pixel_iou: r.non_visible_pixel_iou,
        }
    }
}

pub fn aggregate_reports(reports: &[EvalReport]) -> DatasetReport {
    let per_seq = |f: fn(&EvalReport) -> Option<f64>| mean(reports.iter().filter_map(f));
    let pooled = report_from_frames(reports.iter().flat_map(|r| r.frames.iter().copied()).collect());
    let mut counts = CategoryCounts::default();
    for r in reports {
        counts += r.counts;
    }
    DatasetReport {
        sequences: reports.len(),
        per_sequence_mean: MetricRow {
            mean_iou: per_seq(|r| r.mean_iou),
            occlusion_iou: per_seq(|r| r.occlusion_iou),
            full_occlusion_iou: per_seq(|r| r.full_occlusion_iou),
            non_visible_pixel_iou: per_seq(|r| r.non_visible_pixel_iou),
        },
        pooled_frames: MetricRow::from(&pooled),
        counts,
    }
}
