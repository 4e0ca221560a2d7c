//! End-to-end amodal segmentation run against a set of backends.
//!
//! Artifacts land under the work directory:
//!
//! ```text
//! input/frames/NNNNN.png   staged input frames
//! input/query.png          frame-0 query mask
//! visible/NNNNN.png        segmenter output on the input frames
//! depth/NNNNN.{f32,json}   nearness per frame
//! analysis/verdicts.json   occlusion verdicts
//! analysis/boxes.json      amodal boxes
//! target_regions/NNNNN.png
//! chunks.json
//! trainprep/...            fine-tuning manifest and its images
//! completed/NNNNN.png      outpainted frames on white
//! final/NNNNN.png          amodal masks from re-segmenting completed frames
//! manifest.json            sequence manifest over the above
//! run_metadata.json
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::backend::{call, BackendEndpoints, Endpoint};
use super::chunk::{plan_chunks, Chunk, ChunkConfig};
use super::protocol::{DepthRequest, OutpaintRequest, RequestBody, ResponseBody, SegmentRequest, PROTOCOL_VERSION};
use crate::analysis::{analyze_sequence, AnalysisConfig, SequenceAnalysis};
use crate::data::{Mask, MaskSequence, NearnessMap, VideoGeometry};
use crate::error::{Error, Result};
use crate::io;
use crate::manifest::{FrameEntry, LoadedManifest, NearnessRef, SequenceManifest};
use crate::trainprep::{self, MaskGenConfig, DEFAULT_TOKEN};

pub const RUN_METADATA_FILE: &str = "run_metadata.json";
pub const RUN_METADATA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub analysis: AnalysisConfig,
    pub mask_generation: MaskGenConfig,
    pub token: String,
    pub chunks: ChunkConfig,
    /// Dispatch outpainting chunks concurrently.
    pub parallel_chunks: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            analysis: AnalysisConfig::default(),
            mask_generation: MaskGenConfig::default(),
            token: DEFAULT_TOKEN.to_string(),
            chunks: ChunkConfig::default(),
            parallel_chunks: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.analysis.occlusion.validate()?;
        self.analysis.boxes.validate()?;
        self.mask_generation.validate()?;
        self.chunks.validate()?;
        if self.token.trim().is_empty() {
            return Err(Error::Config("prompt token must not be empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub requests: usize,
    pub outputs: String,
}

/// Written to `run_metadata.json`. Holds no timestamps or absolute paths so
/// that repeated runs produce identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub version: u32,
    pub protocol: String,
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    pub backends: [String; 3],
    pub config: PipelineConfig,
    pub chunks: Vec<Chunk>,
    pub stages: Vec<StageRecord>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub workdir: PathBuf,
    pub visible: MaskSequence,
    pub analysis: SequenceAnalysis,
    pub chunks: Vec<Chunk>,
    pub final_masks: MaskSequence,
}

fn frame_file(dir: &str, t: usize) -> String {
    format!("{dir}/{t:05}.png")
}

/// Wraps a failure to read a backend's output as that stage's failure.
fn stage_err(stage: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        e @ Error::Backend { .. } => e,
        other => Error::backend(stage, format!("unusable output: {other}")),
    }
}

fn expect_len(stage: &str, what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::backend(stage, format!("returned {got} {what}, expected {want}")));
    }
    Ok(())
}

fn segment(
    ep: &dyn Endpoint,
    stage: &str,
    workdir: &Path,
    frames: Vec<String>,
    output_dir: &str,
    g: VideoGeometry,
) -> Result<MaskSequence> {
    let n = frames.len();
    let body = call(
        ep,
        stage,
        stage,
        workdir,
        RequestBody::Segment(SegmentRequest {
            frames,
            frame_indices: (0..n).collect(),
            query_mask: "input/query.png".into(),
            output_dir: output_dir.into(),
        }),
    )?;
    let ResponseBody::Segment { masks } = body else {
        unreachable!("response kind checked by call")
    };
    expect_len(stage, "masks", masks.len(), n)?;
    let masks = masks
        .iter()
        .map(|rel| io::load_mask_sized(workdir.join(rel), g.width, g.height))
        .collect::<Result<Vec<_>>>()
        .map_err(stage_err(stage))?;
    // persist under the canonical names whatever the backend called them
    for (t, m) in masks.iter().enumerate() {
        io::save_mask(m, workdir.join(frame_file(output_dir, t)))?;
    }
    MaskSequence::new(masks)
}

fn depth(ep: &dyn Endpoint, workdir: &Path, t: usize, g: VideoGeometry) -> Result<NearnessMap> {
    let stage = "depth_estimator";
    let body = call(
        ep,
        stage,
        &format!("depth-{t:05}"),
        workdir,
        RequestBody::Depth(DepthRequest {
            frame: frame_file("input/frames", t),
            frame_index: t,
            output_dir: "depth".into(),
        }),
    )?;
    let ResponseBody::Depth {
        nearness_data,
        nearness_header,
    } = body
    else {
        unreachable!("response kind checked by call")
    };
    let map = io::load_nearness(workdir.join(&nearness_data), workdir.join(&nearness_header)).map_err(stage_err(stage))?;
    if map.dims() != (g.width, g.height) {
        return Err(Error::backend(
            stage,
            format!("frame {t}: nearness is {}x{}, expected {}x{}", map.width(), map.height(), g.width, g.height),
        ));
    }
    let canonical = NearnessRef::from_stem(&format!("depth/{t:05}"));
    if canonical.data != nearness_data || canonical.header != nearness_header {
        io::save_nearness(&map, workdir.join(&canonical.data), workdir.join(&canonical.header))?;
    }
    Ok(map)
}

fn outpaint_chunk(
    ep: &dyn Endpoint,
    workdir: &Path,
    k: usize,
    chunk: &Chunk,
    prompt: &str,
    g: VideoGeometry,
) -> Result<Vec<crate::data::FrameImage>> {
    let stage = "outpainter";
    let frames: Vec<usize> = chunk.frames().collect();
    let body = call(
        ep,
        stage,
        &format!("outpaint-{k:03}"),
        workdir,
        RequestBody::Outpaint(OutpaintRequest {
            frames: frames.iter().map(|&t| frame_file("trainprep/input", t)).collect(),
            frame_indices: frames.clone(),
            visible_masks: frames.iter().map(|&t| frame_file("visible", t)).collect(),
            target_regions: frames.iter().map(|&t| frame_file("target_regions", t)).collect(),
            prompt: prompt.to_string(),
            finetune_manifest: format!("trainprep/{}", trainprep::MANIFEST_FILE),
            output_dir: "completed".into(),
        }),
    )?;
    let ResponseBody::Outpaint { completed_frames } = body else {
        unreachable!("response kind checked by call")
    };
    expect_len(stage, "completed frames", completed_frames.len(), frames.len())?;
    completed_frames
        .iter()
        .map(|rel| io::load_frame_sized(workdir.join(rel), g.width, g.height))
        .collect::<Result<Vec<_>>>()
        .map_err(stage_err(stage))
}

/// Runs every stage in order and returns the final amodal masks.
///
/// Fails before contacting any backend if the query is empty or the wrong
/// size, and aborts with the stage named on the first backend failure.
pub fn run_pipeline(
    manifest: &LoadedManifest,
    query: &Mask,
    backends: &BackendEndpoints,
    config: &PipelineConfig,
    workdir: &Path,
) -> Result<PipelineOutput> {
    config.validate()?;
    let g = manifest.geometry();
    if query.dims() != (g.width, g.height) {
        return Err(Error::geometry(
            format!("{}x{}", g.width, g.height),
            format!("{}x{} query mask", query.width(), query.height()),
        ));
    }
    if query.is_empty() {
        return Err(Error::EmptyMask("query mask"));
    }
    std::fs::create_dir_all(workdir).map_err(|e| Error::io(workdir, e))?;
    let workdir = workdir.canonicalize().map_err(|e| Error::io(workdir, e))?;
    let wd = workdir.as_path();
    backends.check_health(wd)?;
    let mut stages = Vec::new();

    let frames = manifest.load_frames()?;
    for (t, f) in frames.iter().enumerate() {
        io::save_frame(f, wd.join(frame_file("input/frames", t)))?;
    }
    io::save_mask(query, wd.join("input/query.png"))?;

    let visible = segment(
        backends.segmenter.as_ref(),
        "segmenter",
        wd,
        (0..g.frame_count).map(|t| frame_file("input/frames", t)).collect(),
        "visible",
        g,
    )?;
    stages.push(StageRecord {
        stage: "segment".into(),
        requests: 1,
        outputs: "visible".into(),
    });
    if visible.get(0).is_empty() {
        return Err(Error::InvalidInput("segmenter found no object in frame 0".into()));
    }

    let nearness = (0..g.frame_count)
        .map(|t| depth(backends.depth_estimator.as_ref(), wd, t, g))
        .collect::<Result<Vec<_>>>()?;
    stages.push(StageRecord {
        stage: "depth".into(),
        requests: g.frame_count,
        outputs: "depth".into(),
    });

    let analysis = analyze_sequence(&visible, &nearness, &config.analysis)?;
    io::write_json(wd.join("analysis/verdicts.json"), &analysis.verdicts)?;
    io::write_json(wd.join("analysis/boxes.json"), &analysis.boxes)?;
    for r in &analysis.target_regions {
        io::save_mask(&r.mask, wd.join(frame_file("target_regions", r.frame)))?;
    }
    stages.push(StageRecord {
        stage: "analysis".into(),
        requests: 0,
        outputs: "analysis".into(),
    });

    let chunks = plan_chunks(&analysis.verdicts, &config.chunks)?;
    io::write_json(wd.join("chunks.json"), &chunks)?;

    let samples = trainprep::build_training_samples(
        &frames,
        &visible,
        &analysis.verdicts,
        &config.mask_generation,
        &config.token,
    )?;
    trainprep::write_training_manifest(&samples, &visible, &config.mask_generation, &config.token, &wd.join("trainprep"))?;
    stages.push(StageRecord {
        stage: "trainprep".into(),
        requests: 0,
        outputs: "trainprep".into(),
    });

    let prompt = trainprep::prompt_for(&config.token);
    let outpainter = backends.outpainter.as_ref();
    let completed: Vec<Vec<crate::data::FrameImage>> = if config.parallel_chunks {
        std::thread::scope(|s| {
            let handles: Vec<_> = chunks
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let prompt = &prompt;
                    s.spawn(move || outpaint_chunk(outpainter, wd, k, c, prompt, g))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("outpaint worker panicked"))
                .collect::<Result<Vec<_>>>()
        })?
    } else {
        chunks
            .iter()
            .enumerate()
            .map(|(k, c)| outpaint_chunk(outpainter, wd, k, c, &prompt, g))
            .collect::<Result<Vec<_>>>()?
    };
    // chunks are concatenated as returned, with no blending across seams
    for (t, f) in completed.iter().flatten().enumerate() {
        io::save_frame(f, wd.join(frame_file("completed", t)))?;
    }
    stages.push(StageRecord {
        stage: "outpaint".into(),
        requests: chunks.len(),
        outputs: "completed".into(),
    });

    let final_masks = segment(
        backends.segmenter.as_ref(),
        "segmenter",
        wd,
        (0..g.frame_count).map(|t| frame_file("completed", t)).collect(),
        "final",
        g,
    )?;
    stages.push(StageRecord {
        stage: "resegment".into(),
        requests: 1,
        outputs: "final".into(),
    });

    let entries = (0..g.frame_count)
        .map(|t| FrameEntry {
            image: frame_file("input/frames", t),
            visible_mask: Some(frame_file("visible", t)),
            nearness: Some(NearnessRef::from_stem(&format!("depth/{t:05}"))),
            amodal_mask: Some(frame_file("final", t)),
            ..Default::default()
        })
        .collect();
    let mut out_manifest = SequenceManifest::new(g, entries)?;
    out_manifest.verdicts = Some(analysis.verdicts.clone());
    out_manifest.boxes = Some(analysis.boxes.clone());
    out_manifest.save(wd.join("manifest.json"))?;

    let metadata = RunMetadata {
        version: RUN_METADATA_VERSION,
        protocol: PROTOCOL_VERSION.to_string(),
        width: g.width,
        height: g.height,
        frame_count: g.frame_count,
        backends: [
            backends.segmenter.describe(),
            backends.depth_estimator.describe(),
            backends.outpainter.describe(),
        ],
        config: config.clone(),
        chunks: chunks.clone(),
        stages,
    };
    io::write_json(wd.join(RUN_METADATA_FILE), &metadata)?;

    Ok(PipelineOutput {
        workdir,
        visible,
        analysis,
        chunks,
        final_masks,
    })
}
