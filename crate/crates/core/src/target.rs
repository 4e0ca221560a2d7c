//! Per-frame target regions: pixels nearer than the object's typical
//! nearness, restricted to the amodal box, plus the visible mask itself.

use serde::{Deserialize, Serialize};

use crate::bbox::AmodalBox;
use crate::data::{Mask, NearnessMap};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceStatistic {
    #[default]
    Mean,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetConfig {
    pub statistic: ReferenceStatistic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetRegion {
    pub frame: usize,
    pub mask: Mask,
}

fn reference_level(values: impl Iterator<Item = f64>, statistic: ReferenceStatistic) -> Option<f64> {
    let mut v: Vec<f64> = values.collect();
    if v.is_empty() {
        return None;
    }
    Some(match statistic {
        ReferenceStatistic::Mean => v.iter().sum::<f64>() / v.len() as f64,
        ReferenceStatistic::Median => {
            v.sort_by(f64::total_cmp);
            let n = v.len();
            if n % 2 == 1 {
                v[n / 2]
            } else {
                (v[n / 2 - 1] + v[n / 2]) / 2.0
            }
        }
    })
}

const TIE_TOLERANCE: f64 = 1e-9;

/// `((nearness > μ) ∪ visible) ∩ box`, with μ taken over the visible pixels,
/// or over the clamped box interior when nothing is visible.
pub fn build_target_region(
    visible: &Mask,
    nearness: &NearnessMap,
    bx: &AmodalBox,
    config: &TargetConfig,
) -> Result<TargetRegion> {
    let (w, h) = visible.dims();
    if nearness.dims() != (w, h) {
        return Err(Error::geometry(
            format!("{w}x{h}"),
            format!("{}x{} nearness", nearness.width(), nearness.height()),
        ));
    }
    let (xs, ys) = bx.pixel_ranges(w, h).ok_or_else(|| {
        Error::InvalidInput(format!("frame {}: amodal box lies entirely outside the image", bx.frame))
    })?;
    let inside_box = |x: usize, y: usize| xs.contains(&x) && ys.contains(&y);

    let mu = if visible.is_empty() {
        let interior = ys
            .clone()
            .flat_map(|y| xs.clone().map(move |x| (x, y)))
            .map(|(x, y)| nearness.get(x, y));
        reference_level(interior, config.statistic)
    } else {
        if !visible.iter_true().any(|(x, y)| inside_box(x, y)) {
            return Err(Error::InvalidInput(format!(
                "frame {}: visible mask does not intersect the amodal box",
                bx.frame
            )));
        }
        reference_level(visible.iter_true().map(|(x, y)| nearness.get(x, y)), config.statistic)
    }
    .expect("reference set is nonempty");
    // ties with μ (up to rounding in the mean) are not nearer
    let cut = mu + TIE_TOLERANCE * mu.abs().max(1.0);

    let mask = Mask::from_fn(w, h, |x, y| {
        inside_box(x, y) && (visible.get(x, y) || nearness.get(x, y) > cut)
    })?;
    Ok(TargetRegion { frame: bx.frame, mask })
}
