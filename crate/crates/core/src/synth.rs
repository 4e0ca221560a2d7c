//! Synthetic occlusion sequences with exact ground truth.
//!
//! A flat-coloured object (rectangle or ellipse) slides horizontally behind a
//! static vertical occluder bar that is wide enough to hide it completely for
//! at least one frame. Background, object and occluder sit at three fixed
//! nearness levels. Frame 0 always shows the whole object, clear of the bar.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FrameImage, Mask, MaskSequence, NearnessMap, VideoGeometry};
use crate::error::{Error, Result};
use crate::io;
use crate::manifest::{FrameEntry, LoadedManifest, MaskField, NearnessRef, SequenceManifest};

pub const BACKGROUND_RGB: [u8; 3] = [51, 77, 204];
pub const OBJECT_RGB: [u8; 3] = [230, 51, 26];
pub const OCCLUDER_RGB: [u8; 3] = [26, 179, 51];
pub const BACKGROUND_NEARNESS: f64 = 0.1;
pub const OBJECT_NEARNESS: f64 = 0.5;
pub const OCCLUDER_NEARNESS: f64 = 0.9;

pub fn rgb(c: [u8; 3]) -> [f64; 3] {
    c.map(|v| v as f64 / 255.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Rectangle,
    Ellipse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    /// Frame count range (inclusive) drawn from the seed.
    pub min_frames: usize,
    pub max_frames: usize,
    /// Without an occluder every frame is fully visible.
    pub occluder: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            width: 64,
            height: 48,
            min_frames: 20,
            max_frames: 40,
            occluder: true,
        }
    }
}

/// Geometry of one generated scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneLayout {
    pub frames: usize,
    pub shape: Shape,
    pub object_width: usize,
    pub object_height: usize,
    pub start_x: i64,
    pub object_y: usize,
    pub velocity_x: i64,
    /// Occluder columns `[x0, x1)`; `None` for an unoccluded scene.
    pub occluder: Option<(usize, usize)>,
}

impl SceneLayout {
    fn object_contains(&self, frame: usize, x: usize, y: usize) -> bool {
        let left = self.start_x + self.velocity_x * frame as i64;
        let (dx, dy) = (x as i64 - left, y as i64 - self.object_y as i64);
        let (w, h) = (self.object_width as i64, self.object_height as i64);
        if dx < 0 || dy < 0 || dx >= w || dy >= h {
            return false;
        }
        match self.shape {
            Shape::Rectangle => true,
            Shape::Ellipse => {
                let u = (dx as f64 + 0.5) / w as f64 * 2.0 - 1.0;
                let v = (dy as f64 + 0.5) / h as f64 * 2.0 - 1.0;
                u * u + v * v <= 1.0
            }
        }
    }

    fn occluder_contains(&self, x: usize) -> bool {
        self.occluder.is_some_and(|(a, b)| (a..b).contains(&x))
    }
}

fn draw_layout(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Option<SceneLayout> {
    let (w, h) = (config.width as i64, config.height as i64);
    let frames = rng.random_range(config.min_frames..=config.max_frames);
    let shape = if rng.random_bool(0.5) {
        Shape::Rectangle
    } else {
        Shape::Ellipse
    };
    let ow = rng.random_range(6..=10usize);
    let oh = rng.random_range(6..=12usize).min(config.height.saturating_sub(4));
    if oh < 3 {
        return None;
    }
    let velocity_x = rng.random_range(1..=2i64);
    let start_x = rng.random_range(1..=4i64);
    let object_y = rng.random_range(2..=(h - oh as i64 - 2).max(2)) as usize;
    if !config.occluder {
        return Some(SceneLayout {
            frames,
            shape,
            object_width: ow,
            object_height: oh,
            start_x,
            object_y,
            velocity_x,
            occluder: None,
        });
    }
    let bar = ow + rng.random_range(2..=6usize);
    let hidden_at = rng.random_range(frames / 3..=2 * frames / 3) as i64;
    let slack = (bar - ow) as i64;
    let bar_x0 = start_x + velocity_x * hidden_at - rng.random_range(1..slack);
    let bar_x1 = bar_x0 + bar as i64;
    // frame 0 clear of the bar by more than the probe distance
    let clear = start_x + ow as i64 + 3 <= bar_x0;
    if !clear || bar_x1 > w {
        return None;
    }
    Some(SceneLayout {
        frames,
        shape,
        object_width: ow,
        object_height: oh,
        start_x,
        object_y,
        velocity_x,
        occluder: Some((bar_x0 as usize, bar_x1 as usize)),
    })
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub layout: SceneLayout,
    pub frames: Vec<FrameImage>,
    pub nearness: Vec<NearnessMap>,
    pub gt_amodal: MaskSequence,
    pub gt_visible: MaskSequence,
}

impl SyntheticScene {
    pub fn generate(config: &SynthConfig) -> Result<Self> {
        if config.width < 32 || config.height < 16 || config.min_frames == 0 || config.min_frames > config.max_frames {
            return Err(Error::Config(format!(
                "synthetic scenes need at least 32x16 pixels and a valid frame range, got {}x{} frames {}..={}",
                config.width, config.height, config.min_frames, config.max_frames
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let layout = (0..1000)
            .find_map(|_| draw_layout(config, &mut rng))
            .ok_or_else(|| Error::Config("could not place an occluder in this geometry".into()))?;
        Ok(Self::render(config.width, config.height, layout))
    }

    pub fn render(width: usize, height: usize, layout: SceneLayout) -> Self {
        let mut frames = Vec::with_capacity(layout.frames);
        let mut nearness = Vec::with_capacity(layout.frames);
        let mut amodal = Vec::with_capacity(layout.frames);
        let mut visible = Vec::with_capacity(layout.frames);
        for t in 0..layout.frames {
            let a = Mask::from_fn(width, height, |x, y| layout.object_contains(t, x, y)).expect("dims are positive");
            let v = Mask::from_fn(width, height, |x, y| a.get(x, y) && !layout.occluder_contains(x)).expect("dims");
            let mut img = FrameImage::filled(width, height, rgb(BACKGROUND_RGB)).expect("dims");
            let z = NearnessMap::from_fn(width, height, |x, y| {
                if layout.occluder_contains(x) {
                    OCCLUDER_NEARNESS
                } else if a.get(x, y) {
                    OBJECT_NEARNESS
                } else {
                    BACKGROUND_NEARNESS
                }
            })
            .expect("finite");
            for y in 0..height {
                for x in 0..width {
                    if layout.occluder_contains(x) {
                        img.set(x, y, rgb(OCCLUDER_RGB));
                    } else if a.get(x, y) {
                        img.set(x, y, rgb(OBJECT_RGB));
                    }
                }
            }
            frames.push(img);
            nearness.push(z);
            amodal.push(a);
            visible.push(v);
        }
        Self {
            layout,
            frames,
            nearness,
            gt_amodal: MaskSequence::new(amodal).expect("uniform dims"),
            gt_visible: MaskSequence::new(visible).expect("uniform dims"),
        }
    }

    pub fn geometry(&self) -> VideoGeometry {
        self.gt_amodal.geometry()
    }

    /// Writes frames, masks and nearness maps plus `manifest.json` and
    /// `scene.json`; returns the manifest path. The manifest's
    /// `visible_mask` entries point at the ground-truth visible masks.
    pub fn write(&self, dir: &Path) -> Result<std::path::PathBuf> {
        let mut entries = Vec::with_capacity(self.frames.len());
        for t in 0..self.frames.len() {
            let image = format!("frames/{t:05}.png");
            let amodal = format!("gt_amodal/{t:05}.png");
            let visible = format!("gt_visible/{t:05}.png");
            let near = NearnessRef::from_stem(&format!("depth/{t:05}"));
            io::save_frame(&self.frames[t], dir.join(&image))?;
            io::save_mask(self.gt_amodal.get(t), dir.join(&amodal))?;
            io::save_mask(self.gt_visible.get(t), dir.join(&visible))?;
            io::save_nearness(&self.nearness[t], dir.join(&near.data), dir.join(&near.header))?;
            entries.push(FrameEntry {
                image,
                visible_mask: Some(visible.clone()),
                nearness: Some(near),
                amodal_mask: None,
                gt_amodal: Some(amodal),
                gt_visible: Some(visible),
            });
        }
        let manifest_path = dir.join("manifest.json");
        SequenceManifest::new(self.geometry(), entries)?.save(&manifest_path)?;
        io::write_json(
            dir.join(SCENE_FILE),
            &SceneFile {
                manifest: "manifest.json".into(),
                object_rgb: OBJECT_RGB,
                layout: self.layout,
            },
        )?;
        io::save_mask(self.gt_visible.get(0), dir.join("query.png"))?;
        Ok(manifest_path)
    }
}

pub const SCENE_FILE: &str = "scene.json";

/// Sidecar describing a synthetic scene on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub manifest: String,
    pub object_rgb: [u8; 3],
    pub layout: SceneLayout,
}

/// Ground truth needed by the mock backends.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub object_rgb: [u8; 3],
    pub gt_amodal: MaskSequence,
    pub gt_visible: MaskSequence,
    pub nearness: Vec<NearnessMap>,
}

impl GroundTruth {
    pub fn from_scene(scene: &SyntheticScene) -> Self {
        Self {
            object_rgb: OBJECT_RGB,
            gt_amodal: scene.gt_amodal.clone(),
            gt_visible: scene.gt_visible.clone(),
            nearness: scene.nearness.clone(),
        }
    }

    /// Loads from a `scene.json` written by [`SyntheticScene::write`].
    pub fn load(scene_file: &Path) -> Result<Self> {
        let scene: SceneFile = io::read_json(scene_file)?;
        let dir = scene_file.parent().unwrap_or(Path::new("."));
        let m = LoadedManifest::load(dir.join(&scene.manifest))?;
        Ok(Self {
            object_rgb: scene.object_rgb,
            gt_amodal: m.load_masks(MaskField::GtAmodal)?,
            gt_visible: m.load_masks(MaskField::GtVisible)?,
            nearness: m.load_nearness()?,
        })
    }
}

/// Pixels whose 8-bit colour equals `rgb` exactly.
pub fn segment_by_color(frame: &FrameImage, rgb: [u8; 3]) -> Mask {
    let bytes = frame.to_rgb8();
    let bits = bytes.chunks_exact(3).map(|p| p == rgb).collect();
    Mask::from_bits(frame.width(), frame.height(), bits).expect("dims match")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenes_meet_their_contract() {
        for seed in 0..50 {
            let s = SyntheticScene::generate(&SynthConfig {
                seed,
                ..Default::default()
            })
            .unwrap();
            let n = s.frames.len();
            assert!((20..=40).contains(&n));
            assert_eq!(s.gt_visible.get(0), s.gt_amodal.get(0), "seed {seed}");
            assert!(!s.gt_amodal.get(0).is_empty());
            let fully = (0..n).filter(|&t| s.gt_visible.get(t).is_empty() && !s.gt_amodal.get(t).is_empty());
            assert!(fully.count() >= 1, "seed {seed}");
            for t in 0..n {
                assert!(s.gt_visible.get(t).is_subset_of(s.gt_amodal.get(t)).unwrap());
                assert_eq!(segment_by_color(&s.frames[t], OBJECT_RGB), *s.gt_visible.get(t));
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig {
            seed: 7,
            ..Default::default()
        };
        let a = SyntheticScene::generate(&cfg).unwrap();
        let b = SyntheticScene::generate(&cfg).unwrap();
        assert_eq!(a.layout, b.layout);
        assert_eq!(a.frames, b.frames);
    }

    #[test]
    fn unoccluded_variant() {
        let s = SyntheticScene::generate(&SynthConfig {
            seed: 3,
            occluder: false,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(s.gt_amodal, s.gt_visible);
    }

    #[test]
    fn write_and_load_ground_truth() {
        let dir = tempfile::tempdir().unwrap();
        let s = SyntheticScene::generate(&SynthConfig::default()).unwrap();
        s.write(dir.path()).unwrap();
        let gt = GroundTruth::load(&dir.path().join(SCENE_FILE)).unwrap();
        assert_eq!(gt.gt_amodal, s.gt_amodal);
        assert_eq!(gt.gt_visible, s.gt_visible);
        for (a, b) in gt.nearness.iter().zip(&s.nearness) {
            for (x, y) in a.values().iter().zip(b.values()) {
                assert_eq!(*x as f32, *y as f32);
            }
        }
    }
}
