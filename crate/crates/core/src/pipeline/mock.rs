//! In-process backends answering from a synthetic scene's ground truth.
//!
//! One mock answers every request type. The segmenter keys on the object's
//! exact colour, so it returns the visible mask on raw frames and the amodal
//! mask on frames completed by the oracle outpainter. Depth returns the
//! scene's nearness. The outpainter either paints the amodal object on white
//! (`oracle`, `noisy`) or copies its input frames back (`echo`). `noisy`
//! additionally flips segmentation bits at `noise_rate`.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::backend::{BackendEndpoints, Endpoint};
use super::protocol::{DepthRequest, OutpaintRequest, Request, RequestBody, Response, ResponseBody, SegmentRequest};
use crate::data::{FrameImage, Mask};
use crate::error::{Error, Result};
use crate::io;
use crate::synth::{segment_by_color, GroundTruth};
use crate::trainprep::WHITE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockMode {
    #[default]
    Oracle,
    Echo,
    Noisy,
}

impl std::str::FromStr for MockMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(MockMode::Oracle),
            "echo" => Ok(MockMode::Echo),
            "noisy" => Ok(MockMode::Noisy),
            other => Err(Error::Config(format!("unknown mock mode `{other}`"))),
        }
    }
}

pub struct MockEndpoint {
    truth: Arc<GroundTruth>,
    mode: MockMode,
    noise_rate: f64,
    seed: u64,
}

impl MockEndpoint {
    pub fn new(truth: Arc<GroundTruth>, mode: MockMode, noise_rate: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&noise_rate) {
            return Err(Error::Config(format!("noise rate must be in [0,1], got {noise_rate}")));
        }
        Ok(Self {
            truth,
            mode,
            noise_rate,
            seed,
        })
    }

    /// Flips each bit independently with probability `noise_rate`, using a
    /// stream keyed by the frame index.
    pub fn perturb(&self, mask: &Mask, frame: usize) -> Mask {
        if self.mode != MockMode::Noisy || self.noise_rate == 0.0 {
            return mask.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(frame as u64);
        let bits = mask.bits().iter().map(|&b| b ^ rng.random_bool(self.noise_rate)).collect();
        Mask::from_bits(mask.width(), mask.height(), bits).expect("same dims")
    }

    fn frame_count(&self) -> usize {
        self.truth.gt_amodal.len()
    }

    fn check_index(&self, frame: usize) -> Result<()> {
        if frame >= self.frame_count() {
            return Err(Error::InvalidInput(format!(
                "frame index {frame} outside the scene's {} frames",
                self.frame_count()
            )));
        }
        Ok(())
    }

    fn segment(&self, workdir: &Path, req: &SegmentRequest) -> Result<ResponseBody> {
        if req.frames.len() != req.frame_indices.len() {
            return Err(Error::InvalidInput("frames and frame_indices differ in length".into()));
        }
        let (w, h) = self.truth.gt_amodal.get(0).dims();
        io::load_mask_sized(workdir.join(&req.query_mask), w, h)?;
        let mut masks = Vec::with_capacity(req.frames.len());
        for (rel, &t) in req.frames.iter().zip(&req.frame_indices) {
            self.check_index(t)?;
            let frame = io::load_frame_sized(workdir.join(rel), w, h)?;
            let mask = self.perturb(&segment_by_color(&frame, self.truth.object_rgb), t);
            let out = format!("{}/{t:05}.png", req.output_dir);
            io::save_mask(&mask, workdir.join(&out))?;
            masks.push(out);
        }
        Ok(ResponseBody::Segment { masks })
    }

    fn depth(&self, workdir: &Path, req: &DepthRequest) -> Result<ResponseBody> {
        self.check_index(req.frame_index)?;
        let map = &self.truth.nearness[req.frame_index];
        io::load_frame_sized(workdir.join(&req.frame), map.width(), map.height())?;
        let nearness_data = format!("{}/{:05}.f32", req.output_dir, req.frame_index);
        let nearness_header = format!("{}/{:05}.json", req.output_dir, req.frame_index);
        io::save_nearness(map, workdir.join(&nearness_data), workdir.join(&nearness_header))?;
        Ok(ResponseBody::Depth {
            nearness_data,
            nearness_header,
        })
    }

    fn outpaint(&self, workdir: &Path, req: &OutpaintRequest) -> Result<ResponseBody> {
        let n = req.frames.len();
        if [req.frame_indices.len(), req.visible_masks.len(), req.target_regions.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(Error::InvalidInput("outpaint request lists differ in length".into()));
        }
        if !workdir.join(&req.finetune_manifest).is_file() {
            return Err(Error::InvalidInput(format!("finetune manifest {} not found", req.finetune_manifest)));
        }
        let (w, h) = self.truth.gt_amodal.get(0).dims();
        let mut completed_frames = Vec::with_capacity(n);
        for (k, &t) in req.frame_indices.iter().enumerate() {
            self.check_index(t)?;
            let input = io::load_frame_sized(workdir.join(&req.frames[k]), w, h)?;
            io::load_mask_sized(workdir.join(&req.visible_masks[k]), w, h)?;
            io::load_mask_sized(workdir.join(&req.target_regions[k]), w, h)?;
            let out = match self.mode {
                MockMode::Echo => input,
                MockMode::Oracle | MockMode::Noisy => {
                    let mut f = FrameImage::filled(w, h, WHITE)?;
                    let color = crate::synth::rgb(self.truth.object_rgb);
                    for (x, y) in self.truth.gt_amodal.get(t).iter_true() {
                        f.set(x, y, color);
                    }
                    f
                }
            };
            let rel = format!("{}/{t:05}.png", req.output_dir);
            io::save_frame(&out, workdir.join(&rel))?;
            completed_frames.push(rel);
        }
        Ok(ResponseBody::Outpaint { completed_frames })
    }

    fn handle(&self, req: &Request) -> Result<ResponseBody> {
        let workdir = PathBuf::from(&req.workdir);
        match &req.body {
            RequestBody::Health => Ok(ResponseBody::Health { status: "ok".into() }),
            RequestBody::Segment(r) => self.segment(&workdir, r),
            RequestBody::Depth(r) => self.depth(&workdir, r),
            RequestBody::Outpaint(r) => self.outpaint(&workdir, r),
        }
    }

    /// Answers one raw request line. Never fails: problems become protocol
    /// error objects.
    pub fn respond(&self, line: &str) -> Response {
        let value: serde_json::Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => return Response::error("", format!("malformed request: {e}")),
        };
        let id = value.get("id").and_then(|v| v.as_str()).unwrap_or_default().to_string();
        let req: Request = match serde_json::from_value(value) {
            Ok(r) => r,
            Err(e) => return Response::error(id, format!("invalid request: {e}")),
        };
        if req.version != super::protocol::PROTOCOL_VERSION {
            return Response::error(id, format!("unsupported protocol version {:?}", req.version));
        }
        match self.handle(&req) {
            Ok(body) => Response::new(id, body),
            Err(e) => Response::error(id, e.to_string()),
        }
    }
}

impl Endpoint for MockEndpoint {
    fn exchange(&self, request: &str) -> Result<String> {
        Ok(serde_json::to_string(&self.respond(request)).expect("responses serialize"))
    }

    fn describe(&self) -> String {
        format!("mock {:?}", self.mode)
    }
}

/// The same mock behind all three roles.
pub fn mock_backends(truth: Arc<GroundTruth>, mode: MockMode, noise_rate: f64, seed: u64) -> Result<BackendEndpoints> {
    let ep: Arc<dyn Endpoint> = Arc::new(MockEndpoint::new(truth, mode, noise_rate, seed)?);
    Ok(BackendEndpoints {
        segmenter: ep.clone(),
        depth_estimator: ep.clone(),
        outpainter: ep,
    })
}

/// Serves newline-delimited requests until `input` closes.
pub fn serve_lines(endpoint: &dyn Endpoint, input: impl BufRead, mut output: impl Write) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = endpoint
            .exchange(&line)
            .unwrap_or_else(|e| serde_json::to_string(&Response::error("", e.to_string())).expect("serializes"));
        writeln!(output, "{reply}")?;
        output.flush()?;
    }
    Ok(())
}
