//! JSON sequence manifest. All paths are relative to the manifest's directory.
//!
//! ```json
//! {
//!   "version": 1,
//!   "width": 64, "height": 48, "frame_count": 2,
//!   "frames": [
//!     { "image": "frames/00000.png",
//!       "visible_mask": "visible/00000.png",
//!       "nearness": { "data": "depth/00000.f32", "header": "depth/00000.json" },
//!       "gt_amodal": "gt_amodal/00000.png",
//!       "amodal_mask": "final/00000.png",
//!       "gt_visible": "gt_visible/00000.png" },
//!     ...
//!   ],
//!   "verdicts": [ ... ],
//!   "boxes": [ ... ]
//! }
//! ```
//!
//! Everything except `image` is optional per frame; consumers report which
//! field they needed when it is missing.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bbox::AmodalBox;
use crate::data::{FrameImage, MaskSequence, NearnessMap, VideoGeometry};
use crate::error::{Error, Result};
use crate::io;
use crate::occlusion::OcclusionVerdict;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NearnessRef {
    pub data: String,
    pub header: String,
}

impl NearnessRef {
    /// `<stem>.f32` / `<stem>.json`.
    pub fn from_stem(stem: &str) -> Self {
        Self {
            data: format!("{stem}.f32"),
            header: format!("{stem}.json"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FrameEntry {
    pub image: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visible_mask: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nearness: Option<NearnessRef>,
    /// Predicted amodal mask.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amodal_mask: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_amodal: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_visible: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceManifest {
    pub version: u32,
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    pub frames: Vec<FrameEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdicts: Option<Vec<OcclusionVerdict>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boxes: Option<Vec<AmodalBox>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskField {
    Visible,
    Amodal,
    GtAmodal,
    GtVisible,
}

impl MaskField {
    pub fn name(self) -> &'static str {
        match self {
            MaskField::Visible => "visible_mask",
            MaskField::Amodal => "amodal_mask",
            MaskField::GtAmodal => "gt_amodal",
            MaskField::GtVisible => "gt_visible",
        }
    }

    fn get(self, entry: &FrameEntry) -> Option<&String> {
        match self {
            MaskField::Visible => entry.visible_mask.as_ref(),
            MaskField::Amodal => entry.amodal_mask.as_ref(),
            MaskField::GtAmodal => entry.gt_amodal.as_ref(),
            MaskField::GtVisible => entry.gt_visible.as_ref(),
        }
    }
}

impl SequenceManifest {
    pub fn new(geometry: VideoGeometry, frames: Vec<FrameEntry>) -> Result<Self> {
        let m = Self {
            version: MANIFEST_VERSION,
            width: geometry.width,
            height: geometry.height,
            frame_count: geometry.frame_count,
            frames,
            verdicts: None,
            boxes: None,
        };
        m.check_shape()?;
        Ok(m)
    }

    pub fn geometry(&self) -> Result<VideoGeometry> {
        VideoGeometry::new(self.width, self.height, self.frame_count)
    }

    fn check_shape(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::InvalidInput(format!("unsupported manifest version {}", self.version)));
        }
        let g = self.geometry()?;
        if self.frames.len() != g.frame_count {
            return Err(Error::InvalidInput(format!(
                "manifest lists {} frames but frame_count is {}",
                self.frames.len(),
                g.frame_count
            )));
        }
        if let Some(v) = &self.verdicts {
            if v.len() != g.frame_count {
                return Err(Error::InvalidInput(format!("{} verdicts for {} frames", v.len(), g.frame_count)));
            }
        }
        if let Some(b) = &self.boxes {
            if b.len() != g.frame_count {
                return Err(Error::InvalidInput(format!("{} boxes for {} frames", b.len(), g.frame_count)));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_json(path, self)
    }
}

/// A manifest together with the directory its paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedManifest {
    pub manifest: SequenceManifest,
    pub base_dir: PathBuf,
}

impl LoadedManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let manifest: SequenceManifest = io::read_json(path)?;
        manifest.check_shape()?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { manifest, base_dir })
    }

    pub fn geometry(&self) -> VideoGeometry {
        self.manifest.geometry().expect("checked at load")
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.base_dir.join(rel)
    }

    pub fn frame_paths(&self) -> Vec<PathBuf> {
        self.manifest.frames.iter().map(|f| self.resolve(&f.image)).collect()
    }

    pub fn load_frames(&self) -> Result<Vec<FrameImage>> {
        let g = self.geometry();
        self.frame_paths()
            .iter()
            .map(|p| io::load_frame_sized(p, g.width, g.height))
            .collect()
    }

    pub fn has_masks(&self, field: MaskField) -> bool {
        self.manifest.frames.iter().all(|f| field.get(f).is_some())
    }

    pub fn load_masks(&self, field: MaskField) -> Result<MaskSequence> {
        let g = self.geometry();
        let masks = self
            .manifest
            .frames
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let rel = field.get(f).ok_or_else(|| {
                    Error::InvalidInput(format!("frame {i} has no `{}` entry", field.name()))
                })?;
                io::load_mask_sized(self.resolve(rel), g.width, g.height)
            })
            .collect::<Result<Vec<_>>>()?;
        MaskSequence::new(masks)
    }

    pub fn load_nearness(&self) -> Result<Vec<NearnessMap>> {
        let g = self.geometry();
        self.manifest
            .frames
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let r = f
                    .nearness
                    .as_ref()
                    .ok_or_else(|| Error::InvalidInput(format!("frame {i} has no `nearness` entry")))?;
                let map = io::load_nearness(self.resolve(&r.data), self.resolve(&r.header))?;
                if map.dims() != (g.width, g.height) {
                    return Err(Error::geometry(
                        format!("{}x{}", g.width, g.height),
                        format!("{}x{} nearness at frame {i}", map.width(), map.height()),
                    ));
                }
                Ok(map)
            })
            .collect()
    }

    /// Loads every referenced file and checks it against the geometry.
    pub fn validate(&self) -> Result<()> {
        self.load_frames()?;
        for field in [MaskField::Visible, MaskField::Amodal, MaskField::GtAmodal, MaskField::GtVisible] {
            if self.manifest.frames.iter().any(|f| field.get(f).is_some()) {
                self.load_masks(field)?;
            }
        }
        if self.manifest.frames.iter().any(|f| f.nearness.is_some()) {
            self.load_nearness()?;
        }
        Ok(())
    }
}
