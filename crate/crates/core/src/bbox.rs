//! Amodal bounding boxes: observed from visible masks, filled across gaps by
//! interpolation or constant-velocity extrapolation, and grown back to a
//! reference area when the object is occluded.
//!
//! Boxes use half-open pixel coordinates: pixel `(x, y)` spans
//! `[x, x+1) × [y, y+1)`. Stored boxes are never clamped to the image so that
//! a box which has left the frame stays detectable.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::data::{Mask, MaskSequence, VideoGeometry};
use crate::error::{Error, Result};
use crate::occlusion::{OcclusionLabel, OcclusionVerdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Observed,
    Interpolated,
    Extrapolated,
    Grown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox")]
pub struct AmodalBox {
    pub frame: usize,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub provenance: Provenance,
}

#[derive(Deserialize)]
struct RawBox {
    frame: usize,
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    provenance: Provenance,
}

impl TryFrom<RawBox> for AmodalBox {
    type Error = Error;

    fn try_from(r: RawBox) -> Result<Self> {
        AmodalBox::new(r.frame, r.x0, r.y0, r.x1, r.y1, r.provenance)
    }
}

impl AmodalBox {
    pub fn new(frame: usize, x0: f64, y0: f64, x1: f64, y1: f64, provenance: Provenance) -> Result<Self> {
        if ![x0, y0, x1, y1].iter().all(|v| v.is_finite()) || x1 <= x0 || y1 <= y0 {
            return Err(Error::InvalidInput(format!(
                "frame {frame}: box ({x0}, {y0}, {x1}, {y1}) must be finite with positive extent"
            )));
        }
        Ok(Self {
            frame,
            x0,
            y0,
            x1,
            y1,
            provenance,
        })
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> [f64; 2] {
        [(self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0]
    }

    pub fn corners(&self) -> [f64; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }

    /// True when no part of the box overlaps the image.
    pub fn is_outside_image(&self, width: usize, height: usize) -> bool {
        self.x1 <= 0.0 || self.y1 <= 0.0 || self.x0 >= width as f64 || self.y0 >= height as f64
    }

    /// Pixel index ranges covered after clamping to the image, rounding
    /// outward. `None` when the box misses the image.
    pub fn pixel_ranges(&self, width: usize, height: usize) -> Option<(Range<usize>, Range<usize>)> {
        if self.is_outside_image(width, height) {
            return None;
        }
        let xs = self.x0.max(0.0).floor() as usize..(self.x1.min(width as f64).ceil() as usize);
        let ys = self.y0.max(0.0).floor() as usize..(self.y1.min(height as f64).ceil() as usize);
        (!xs.is_empty() && !ys.is_empty()).then_some((xs, ys))
    }

    fn scaled(&self, sx: f64, sy: f64, provenance: Provenance) -> Result<AmodalBox> {
        let [cx, cy] = self.center();
        let hw = self.width() * sx / 2.0;
        let hh = self.height() * sy / 2.0;
        AmodalBox::new(self.frame, cx - hw, cy - hh, cx + hw, cy + hh, provenance)
    }

    fn with_corners(frame: usize, c: [f64; 4], provenance: Provenance) -> Result<AmodalBox> {
        AmodalBox::new(frame, c[0], c[1], c[2], c[3], provenance)
    }
}

/// Tight half-open box around the mask, or `None` for an empty mask.
pub fn observed_box(mask: &Mask, frame: usize) -> Option<AmodalBox> {
    let mut it = mask.iter_true();
    let (fx, fy) = it.next()?;
    let (mut x0, mut y0, mut x1, mut y1) = (fx, fy, fx, fy);
    for (x, y) in it {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    Some(AmodalBox {
        frame,
        x0: x0 as f64,
        y0: y0 as f64,
        x1: (x1 + 1) as f64,
        y1: (y1 + 1) as f64,
        provenance: Provenance::Observed,
    })
}

fn lerp_corners(a: &AmodalBox, b: &AmodalBox, t: f64) -> [f64; 4] {
    let (ca, cb) = (a.corners(), b.corners());
    std::array::from_fn(|k| ca[k] + (cb[k] - ca[k]) * t)
}

/// Constant-velocity extrapolation from `near` (closest observed box) and
/// `far` (the next observed box beyond it) to `frame`.
fn extrapolate(near: &AmodalBox, far: Option<&AmodalBox>, frame: usize) -> Result<AmodalBox> {
    let Some(far) = far else {
        return AmodalBox::with_corners(frame, near.corners(), Provenance::Extrapolated);
    };
    let steps = (frame as f64 - near.frame as f64) / (near.frame as f64 - far.frame as f64);
    let (cn, cf) = (near.corners(), far.corners());
    let corners: [f64; 4] = std::array::from_fn(|k| cn[k] + (cn[k] - cf[k]) * steps);
    AmodalBox::with_corners(frame, corners, Provenance::Extrapolated).or_else(|_| {
        // shrinking extents crossed zero: translate the nearest box by its
        // center velocity instead
        let [nx, ny] = near.center();
        let [fx, fy] = far.center();
        let dx = (nx - fx) * steps;
        let dy = (ny - fy) * steps;
        AmodalBox::with_corners(
            frame,
            [cn[0] + dx, cn[1] + dy, cn[2] + dx, cn[3] + dy],
            Provenance::Extrapolated,
        )
    })
}

/// Fills frames without an observed box. Interior gaps interpolate each
/// corner linearly; leading and trailing gaps extrapolate at constant
/// velocity from the two nearest observed boxes (or copy a lone one).
/// Observed boxes pass through unchanged.
pub fn fill_missing_boxes(boxes: &[Option<AmodalBox>], geometry: VideoGeometry) -> Result<Vec<AmodalBox>> {
    if boxes.len() != geometry.frame_count {
        return Err(Error::InvalidInput(format!(
            "{} boxes for {} frames",
            boxes.len(),
            geometry.frame_count
        )));
    }
    let observed: Vec<AmodalBox> = boxes
        .iter()
        .enumerate()
        .filter_map(|(i, b)| b.map(|b| AmodalBox { frame: i, ..b }))
        .collect();
    if observed.is_empty() {
        return Err(Error::InvalidInput("no observed box in any frame".into()));
    }
    let mut out = Vec::with_capacity(boxes.len());
    let mut next = 0usize; // index into `observed` of the first box at or after frame i
    for (i, b) in boxes.iter().enumerate() {
        if let Some(b) = b {
            out.push(AmodalBox { frame: i, ..*b });
            next += 1;
            continue;
        }
        let filled = match (next.checked_sub(1).map(|p| &observed[p]), observed.get(next)) {
            (Some(a), Some(b)) => {
                let t = (i - a.frame) as f64 / (b.frame - a.frame) as f64;
                AmodalBox::with_corners(i, lerp_corners(a, b, t), Provenance::Interpolated)?
            }
            (None, Some(b)) => extrapolate(b, observed.get(next + 1), i)?,
            (Some(a), None) => extrapolate(a, next.checked_sub(2).map(|p| &observed[p]), i)?,
            (None, None) => unreachable!("observed is nonempty"),
        };
        out.push(filled);
    }
    Ok(out)
}

/// Scales an occluded frame's box uniformly about its center until its area
/// equals `reference_area`. Boxes already at least that large are unchanged.
pub fn grow_for_occlusion(bx: &AmodalBox, verdict: &OcclusionVerdict, reference_area: f64) -> Result<AmodalBox> {
    if verdict.label() != OcclusionLabel::Occluded {
        return Err(Error::InvalidInput(format!(
            "frame {}: growth applies to occluded frames, got {:?}",
            verdict.frame(),
            verdict.label()
        )));
    }
    if !(reference_area > 0.0 && reference_area.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "reference area must be positive, got {reference_area}"
        )));
    }
    let area = bx.area();
    if area >= reference_area {
        return Ok(*bx);
    }
    let s = (reference_area / area).sqrt();
    bx.scaled(s, s, Provenance::Grown)
}

/// Scales width and height by `1 + expansion_percent / 100` about the center.
pub fn adjust_box(bx: &AmodalBox, expansion_percent: f64) -> Result<AmodalBox> {
    if !(expansion_percent > -100.0 && expansion_percent.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "expansion percent must be > -100, got {expansion_percent}"
        )));
    }
    if expansion_percent == 0.0 {
        return Ok(*bx);
    }
    let s = 1.0 + expansion_percent / 100.0;
    bx.scaled(s, s, bx.provenance)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoxConfig {
    /// Relative area drop versus recent unoccluded boxes that triggers growth.
    pub area_drop_fraction: f64,
    /// Number of most recent unoccluded boxes tracked for the running maximum.
    pub window: usize,
    /// Final uniform expansion (+) or contraction (−) in percent.
    pub expansion_percent: f64,
}

impl Default for BoxConfig {
    fn default() -> Self {
        Self {
            area_drop_fraction: 0.25,
            window: 5,
            expansion_percent: 0.0,
        }
    }
}

impl BoxConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.area_drop_fraction) {
            return Err(Error::Config(format!(
                "area drop fraction must be in [0,1), got {}",
                self.area_drop_fraction
            )));
        }
        if self.window == 0 {
            return Err(Error::Config("box window must be at least 1".into()));
        }
        if !(self.expansion_percent > -100.0 && self.expansion_percent.is_finite()) {
            return Err(Error::Config(format!(
                "expansion percent must be > -100, got {}",
                self.expansion_percent
            )));
        }
        Ok(())
    }
}

/// Observed boxes for every frame, filled across gaps.
pub fn initial_boxes(visible: &MaskSequence) -> Result<Vec<AmodalBox>> {
    let observed: Vec<Option<AmodalBox>> = visible
        .masks()
        .iter()
        .enumerate()
        .map(|(i, m)| observed_box(m, i))
        .collect();
    fill_missing_boxes(&observed, visible.geometry())
}

/// Grows boxes on occluded frames whose area dropped by more than
/// `area_drop_fraction` below the running maximum of the last `window`
/// unoccluded observed boxes, then applies the configured expansion.
///
/// The growth target is the area of the most recent unoccluded observed box,
/// falling back to the first observed box (the query frame).
pub fn refine_boxes(boxes: &[AmodalBox], verdicts: &[OcclusionVerdict], config: &BoxConfig) -> Result<Vec<AmodalBox>> {
    config.validate()?;
    if boxes.len() != verdicts.len() {
        return Err(Error::InvalidInput(format!(
            "{} boxes but {} verdicts",
            boxes.len(),
            verdicts.len()
        )));
    }
    let query_area = boxes
        .iter()
        .find(|b| b.provenance == Provenance::Observed)
        .map(AmodalBox::area)
        .ok_or_else(|| Error::InvalidInput("no observed box to take a reference area from".into()))?;
    let mut recent: std::collections::VecDeque<f64> = std::collections::VecDeque::with_capacity(config.window);
    let mut out = Vec::with_capacity(boxes.len());
    for (bx, verdict) in boxes.iter().zip(verdicts) {
        let mut refined = *bx;
        if verdict.label() == OcclusionLabel::Occluded {
            let running_max = if recent.is_empty() {
                query_area
            } else {
                recent.iter().copied().fold(f64::MIN, f64::max)
            };
            let reference = recent.back().copied().unwrap_or(query_area);
            if bx.area() < (1.0 - config.area_drop_fraction) * running_max {
                refined = grow_for_occlusion(bx, verdict, reference)?;
            }
        } else if verdict.is_unoccluded() && bx.provenance == Provenance::Observed {
            if recent.len() == config.window {
                recent.pop_front();
            }
            recent.push_back(bx.area());
        }
        out.push(adjust_box(&refined, config.expansion_percent)?);
    }
    Ok(out)
}
