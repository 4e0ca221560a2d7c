//! Runs occlusion labelling, box estimation and target-region construction
//! over a whole sequence.

use serde::{Deserialize, Serialize};

use crate::bbox::{self, AmodalBox, BoxConfig};
use crate::data::{Mask, MaskSequence, NearnessMap};
use crate::error::Result;
use crate::occlusion::{self, OcclusionConfig, OcclusionLabel, OcclusionVerdict};
use crate::target::{self, TargetConfig, TargetRegion};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub occlusion: OcclusionConfig,
    pub boxes: BoxConfig,
    pub target: TargetConfig,
}

#[derive(Debug, Clone)]
pub struct SequenceAnalysis {
    pub verdicts: Vec<OcclusionVerdict>,
    pub boxes: Vec<AmodalBox>,
    pub target_regions: Vec<TargetRegion>,
}

/// Verdicts and final boxes; frames that left the image keep their
/// extrapolated box.
pub fn verdicts_and_boxes(
    visible: &MaskSequence,
    nearness: &[NearnessMap],
    config: &AnalysisConfig,
) -> Result<(Vec<OcclusionVerdict>, Vec<AmodalBox>)> {
    let initial = bbox::initial_boxes(visible)?;
    let verdicts = occlusion::label_frames(visible, nearness, Some(&initial), &config.occlusion)?;
    let boxes = bbox::refine_boxes(&initial, &verdicts, &config.boxes)?;
    Ok((verdicts, boxes))
}

/// Target regions for each frame; an out-of-frame object gets an empty region.
pub fn target_regions(
    visible: &MaskSequence,
    nearness: &[NearnessMap],
    verdicts: &[OcclusionVerdict],
    boxes: &[AmodalBox],
    config: &TargetConfig,
) -> Result<Vec<TargetRegion>> {
    let g = visible.geometry();
    visible
        .masks()
        .iter()
        .zip(nearness)
        .zip(verdicts.iter().zip(boxes))
        .map(|((vis, z), (verdict, bx))| {
            if verdict.label() == OcclusionLabel::OutOfFrame || bx.is_outside_image(g.width, g.height) {
                return Ok(TargetRegion {
                    frame: bx.frame,
                    mask: Mask::empty(g.width, g.height)?,
                });
            }
            target::build_target_region(vis, z, bx, config)
        })
        .collect()
}

pub fn analyze_sequence(visible: &MaskSequence, nearness: &[NearnessMap], config: &AnalysisConfig) -> Result<SequenceAnalysis> {
    let (verdicts, boxes) = verdicts_and_boxes(visible, nearness, config)?;
    let target_regions = target_regions(visible, nearness, &verdicts, &boxes, &config.target)?;
    Ok(SequenceAnalysis {
        verdicts,
        boxes,
        target_regions,
    })
}
