//! Alpha compositing of an occluder clip over an object clip, with
//! foreground-colour recovery against a clean plate, and depth-based
//! refinement of segmentation masks.

use serde::{Deserialize, Serialize};

use std::path::{Path, PathBuf};

use crate::data::{FrameImage, Mask, NearnessMap, VideoGeometry};
use crate::error::{Error, Result};
use crate::io;
use crate::manifest::{FrameEntry, SequenceManifest};

/// Per-pixel alpha matte in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMatte {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl AlphaMatte {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::geometry(
                format!("{} alpha values", width * height),
                format!("{}", values.len()),
            ));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidInput(format!("alpha value {v} outside [0,1]")));
        }
        Ok(Self { width, height, values })
    }

    pub fn constant(width: usize, height: usize, alpha: f64) -> Result<Self> {
        Self::new(width, height, vec![alpha; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let values = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self::new(width, height, values)
    }

    /// 8-bit matte, `value / 255`.
    pub fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(width, height, bytes.iter().map(|&b| b as f64 / 255.0).collect())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompositeConfig {
    /// Alphas at or below this are treated as fully transparent.
    pub alpha_min: f64,
    /// Pixels with alpha above this count as hidden in the visible mask.
    pub alpha_cut: f64,
    /// Solve the foreground colour against the object frame instead of the
    /// clean plate (reproduces the alternative printed form of the solve).
    pub verbatim_eq: bool,
    /// Margin in normalized nearness for depth refinement.
    pub depth_margin: f64,
}

impl Default for CompositeConfig {
    fn default() -> Self {
        Self {
            alpha_min: 1e-4,
            alpha_cut: 0.5,
            verbatim_eq: false,
            depth_margin: 0.05,
        }
    }
}

impl CompositeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha_min) {
            return Err(Error::Config(format!("alpha_min must be in [0,1), got {}", self.alpha_min)));
        }
        if !(0.0..1.0).contains(&self.alpha_cut) {
            return Err(Error::Config(format!("alpha_cut must be in [0,1), got {}", self.alpha_cut)));
        }
        if !(self.depth_margin >= 0.0) {
            return Err(Error::Config(format!("depth margin must be >= 0, got {}", self.depth_margin)));
        }
        Ok(())
    }
}

/// One frame's worth of compositing inputs.
#[derive(Debug, Clone)]
pub struct CompositeScene {
    pub clean_plate: FrameImage,
    pub background: FrameImage,
    pub foreground: FrameImage,
    pub alpha: AlphaMatte,
    pub gt_amodal: Mask,
}

impl CompositeScene {
    pub fn new(
        clean_plate: FrameImage,
        background: FrameImage,
        foreground: FrameImage,
        alpha: AlphaMatte,
        gt_amodal: Mask,
    ) -> Result<Self> {
        let dims = background.dims();
        let all = [
            ("clean plate", clean_plate.dims()),
            ("foreground", foreground.dims()),
            ("alpha", alpha.dims()),
            ("amodal mask", gt_amodal.dims()),
        ];
        for (name, d) in all {
            if d != dims {
                return Err(Error::geometry(
                    format!("{}x{}", dims.0, dims.1),
                    format!("{}x{} {name}", d.0, d.1),
                ));
            }
        }
        Ok(Self {
            clean_plate,
            background,
            foreground,
            alpha,
            gt_amodal,
        })
    }

    fn dims(&self) -> (usize, usize) {
        self.background.dims()
    }
}

/// Solves `I_fg = (1−α)·I_cp + α·C_fg` for `C_fg`, clamped to `[0, 1]`.
/// Pixels with `α ≤ alpha_min` get 0; their weight downstream is zero.
pub fn recover_foreground_color(scene: &CompositeScene, config: &CompositeConfig) -> FrameImage {
    let (w, h) = scene.dims();
    let base = if config.verbatim_eq {
        &scene.background
    } else {
        &scene.clean_plate
    };
    let mut out = FrameImage::filled(w, h, [0.0; 3]).expect("dims are positive");
    for y in 0..h {
        for x in 0..w {
            let a = scene.alpha.get(x, y);
            if a <= config.alpha_min {
                continue;
            }
            let fg = scene.foreground.get(x, y);
            let b = base.get(x, y);
            let c: [f64; 3] = std::array::from_fn(|k| ((fg[k] - (1.0 - a) * b[k]) / a).clamp(0.0, 1.0));
            out.set(x, y, c);
        }
    }
    out
}

/// `I_comp = (1−α)·I_bg + α·C_fg`.
pub fn composite(scene: &CompositeScene, foreground_color: &FrameImage) -> Result<FrameImage> {
    let (w, h) = scene.dims();
    if foreground_color.dims() != (w, h) {
        return Err(Error::geometry(
            format!("{w}x{h}"),
            format!("{}x{} foreground colour", foreground_color.width(), foreground_color.height()),
        ));
    }
    let mut out = scene.background.clone();
    for y in 0..h {
        for x in 0..w {
            let a = scene.alpha.get(x, y);
            let bg = scene.background.get(x, y);
            let c = foreground_color.get(x, y);
            out.set(x, y, std::array::from_fn(|k| (1.0 - a) * bg[k] + a * c[k]));
        }
    }
    Ok(out)
}

/// Amodal pixels not hidden by the occluder: `amodal ∧ (α ≤ alpha_cut)`.
pub fn derive_visible_mask(scene: &CompositeScene, alpha_cut: f64) -> Result<Mask> {
    if !(0.0..1.0).contains(&alpha_cut) {
        return Err(Error::InvalidInput(format!("alpha cut must be in [0,1), got {alpha_cut}")));
    }
    let (w, h) = scene.dims();
    Mask::from_fn(w, h, |x, y| scene.gt_amodal.get(x, y) && scene.alpha.get(x, y) <= alpha_cut)
}

/// Drops mask pixels farther than the mask's mean nearness by more than
/// `margin`: keeps `nearness ≥ μ − margin`.
pub fn depth_refine_mask(mask: &Mask, nearness: &NearnessMap, margin: f64) -> Result<Mask> {
    if mask.dims() != nearness.dims() {
        return Err(Error::geometry(
            format!("{}x{}", mask.width(), mask.height()),
            format!("{}x{} nearness", nearness.width(), nearness.height()),
        ));
    }
    let mu = nearness
        .mean_over(mask)
        .ok_or(Error::EmptyMask("depth refinement needs a nonempty mask"))?;
    let (w, h) = mask.dims();
    Mask::from_fn(w, h, |x, y| mask.get(x, y) && nearness.get(x, y) >= mu - margin)
}

/// Everything produced for one composited frame.
#[derive(Debug, Clone)]
pub struct CompositeOutput {
    pub foreground_color: FrameImage,
    pub composite: FrameImage,
    pub gt_visible: Mask,
}

pub fn composite_frame(scene: &CompositeScene, config: &CompositeConfig) -> Result<CompositeOutput> {
    config.validate()?;
    let foreground_color = recover_foreground_color(scene, config);
    let composite = composite(scene, &foreground_color)?;
    let gt_visible = derive_visible_mask(scene, config.alpha_cut)?;
    Ok(CompositeOutput {
        foreground_color,
        composite,
        gt_visible,
    })
}

/// Per-clip frame offsets; output frame `k` reads clip frame `k + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClipOffsets {
    pub clean_plate: usize,
    pub background: usize,
    pub foreground: usize,
}

/// On-disk description of a compositing job. Paths are relative to the file.
/// `alpha` follows the foreground clip, `gt_amodal` the background clip. A
/// single clean plate is reused for every frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositeSceneFile {
    pub clean_plate: Vec<String>,
    pub background: Vec<String>,
    pub foreground: Vec<String>,
    pub alpha: Vec<String>,
    pub gt_amodal: Vec<String>,
    #[serde(default)]
    pub offsets: ClipOffsets,
    /// Defaults to the longest span every clip can supply.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_count: Option<usize>,
}

impl CompositeSceneFile {
    fn available(&self) -> Result<usize> {
        if self.alpha.len() != self.foreground.len() {
            return Err(Error::InvalidInput(format!(
                "{} alpha mattes for {} foreground frames",
                self.alpha.len(),
                self.foreground.len()
            )));
        }
        if self.gt_amodal.len() != self.background.len() {
            return Err(Error::InvalidInput(format!(
                "{} amodal masks for {} background frames",
                self.gt_amodal.len(),
                self.background.len()
            )));
        }
        let span = |len: usize, off: usize| len.saturating_sub(off);
        let mut n = span(self.background.len(), self.offsets.background).min(span(self.foreground.len(), self.offsets.foreground));
        if self.clean_plate.len() != 1 {
            n = n.min(span(self.clean_plate.len(), self.offsets.clean_plate));
        }
        Ok(n)
    }

    /// Number of output frames after offsets.
    pub fn frame_count(&self) -> Result<usize> {
        if self.clean_plate.is_empty() {
            return Err(Error::InvalidInput("scene lists no clean plate".into()));
        }
        let available = self.available()?;
        let n = self.frame_count.unwrap_or(available);
        if n == 0 || n > available {
            return Err(Error::InvalidInput(format!(
                "scene supplies {available} aligned frames, {n} requested"
            )));
        }
        Ok(n)
    }

    /// Loads output frame `k`.
    pub fn load_frame(&self, base: &Path, k: usize) -> Result<CompositeScene> {
        let cp = if self.clean_plate.len() == 1 {
            &self.clean_plate[0]
        } else {
            &self.clean_plate[k + self.offsets.clean_plate]
        };
        let b = k + self.offsets.background;
        let f = k + self.offsets.foreground;
        let alpha = io::load_alpha(base.join(&self.alpha[f]))?;
        CompositeScene::new(
            io::load_frame(base.join(cp))?,
            io::load_frame(base.join(&self.background[b]))?,
            io::load_frame(base.join(&self.foreground[f]))?,
            alpha,
            io::load_mask(base.join(&self.gt_amodal[b]))?,
        )
    }
}

/// Composites every frame of a scene file into `out_dir`: `frames/`,
/// `gt_amodal/` (copied), `gt_visible/` (derived) and `manifest.json`.
/// Returns the manifest path.
pub fn composite_clips(scene_path: &Path, config: &CompositeConfig, out_dir: &Path) -> Result<PathBuf> {
    config.validate()?;
    let file: CompositeSceneFile = io::read_json(scene_path)?;
    let base = scene_path.parent().unwrap_or(Path::new("."));
    let n = file.frame_count()?;
    let mut entries = Vec::with_capacity(n);
    let mut dims = None;
    for k in 0..n {
        let scene = file.load_frame(base, k)?;
        let d = scene.dims();
        if *dims.get_or_insert(d) != d {
            let e = dims.expect("set above");
            return Err(Error::geometry(format!("{}x{}", e.0, e.1), format!("{}x{} at frame {k}", d.0, d.1)));
        }
        let out = composite_frame(&scene, config)?;
        let image = format!("frames/{k:05}.png");
        let amodal = format!("gt_amodal/{k:05}.png");
        let visible = format!("gt_visible/{k:05}.png");
        io::save_frame(&out.composite, out_dir.join(&image))?;
        io::save_mask(&scene.gt_amodal, out_dir.join(&amodal))?;
        io::save_mask(&out.gt_visible, out_dir.join(&visible))?;
        entries.push(FrameEntry {
            image,
            gt_amodal: Some(amodal),
            gt_visible: Some(visible),
            ..Default::default()
        });
    }
    let (w, h) = dims.expect("at least one frame");
    let path = out_dir.join("manifest.json");
    SequenceManifest::new(VideoGeometry::new(w, h, n)?, entries)?.save(&path)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn px(v: f64) -> FrameImage {
        FrameImage::filled(1, 1, [v; 3]).unwrap()
    }

    fn scene1(alpha: f64, cp: f64, bg: f64, fg: f64) -> CompositeScene {
        CompositeScene::new(
            px(cp),
            px(bg),
            px(fg),
            AlphaMatte::constant(1, 1, alpha).unwrap(),
            Mask::full(1, 1).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn opaque_alpha_returns_foreground() {
        let s = scene1(1.0, 0.3, 0.4, 0.65);
        let c = recover_foreground_color(&s, &CompositeConfig::default());
        assert_eq!(c.get(0, 0), [0.65; 3]);
        let comp = composite(&s, &c).unwrap();
        assert_eq!(comp.get(0, 0), [0.65; 3]);
    }

    #[test]
    fn transparent_alpha() {
        let s = scene1(0.0, 0.3, 0.4, 0.65);
        let c = recover_foreground_color(&s, &CompositeConfig::default());
        assert_eq!(c.get(0, 0), [0.0; 3]);
        assert_eq!(composite(&s, &c).unwrap(), s.background);
    }

    #[test]
    fn half_alpha_hand_algebra() {
        let s = scene1(0.5, 0.2, 0.4, 0.6);
        let c = recover_foreground_color(&s, &CompositeConfig::default());
        for v in c.get(0, 0) {
            assert!((v - 1.0).abs() < 1e-12);
        }
        let comp = composite(&s, &c).unwrap();
        for v in comp.get(0, 0) {
            assert!((v - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn verbatim_form_uses_object_frame() {
        // (0.6 − 0.5·0.4)/0.5 = 0.8
        let s = scene1(0.5, 0.2, 0.4, 0.6);
        let cfg = CompositeConfig {
            verbatim_eq: true,
            ..Default::default()
        };
        for v in recover_foreground_color(&s, &cfg).get(0, 0) {
            assert!((v - 0.8).abs() < 1e-12);
        }
    }

    #[test]
    fn recovered_colour_is_clamped() {
        // (0.9 − 0.5·0.0)/0.5 = 1.8 → 1
        let s = scene1(0.5, 0.0, 0.0, 0.9);
        assert_eq!(recover_foreground_color(&s, &CompositeConfig::default()).get(0, 0), [1.0; 3]);
    }

    fn square_scene(alpha: impl Fn(usize, usize) -> f64) -> CompositeScene {
        let gray = FrameImage::filled(8, 8, [0.5; 3]).unwrap();
        CompositeScene::new(
            gray.clone(),
            gray.clone(),
            gray,
            AlphaMatte::from_fn(8, 8, alpha).unwrap(),
            Mask::from_fn(8, 8, |x, y| (2..6).contains(&x) && (2..6).contains(&y)).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn visible_mask_cases() {
        let s = square_scene(|_, _| 0.0);
        assert_eq!(derive_visible_mask(&s, 0.5).unwrap(), s.gt_amodal);
        let s = square_scene(|_, _| 1.0);
        assert!(derive_visible_mask(&s, 0.5).unwrap().is_empty());
        let s = square_scene(|x, _| if x < 4 { 1.0 } else { 0.0 });
        let expected = Mask::from_fn(8, 8, |x, y| (4..6).contains(&x) && (2..6).contains(&y)).unwrap();
        assert_eq!(derive_visible_mask(&s, 0.5).unwrap(), expected);
        assert!(derive_visible_mask(&s, 1.0).is_err());
    }

    #[test]
    fn depth_refinement() {
        let m = Mask::from_fn(6, 4, |x, _| x < 4).unwrap();
        let flat = NearnessMap::constant(6, 4, 0.3).unwrap();
        assert_eq!(depth_refine_mask(&m, &flat, 0.0).unwrap(), m);
        let split = NearnessMap::from_fn(6, 4, |x, _| if x < 2 { 0.9 } else { 0.1 }).unwrap();
        let kept = depth_refine_mask(&m, &split, 0.0).unwrap();
        assert_eq!(kept, Mask::from_fn(6, 4, |x, _| x < 2).unwrap());
        assert_eq!(depth_refine_mask(&m, &split, 1e9).unwrap(), m);
        assert!(depth_refine_mask(&Mask::empty(6, 4).unwrap(), &flat, 0.0).is_err());
    }

    #[test]
    fn scene_geometry_checked() {
        let a = FrameImage::filled(4, 4, [0.0; 3]).unwrap();
        let b = FrameImage::filled(4, 5, [0.0; 3]).unwrap();
        let r = CompositeScene::new(
            a.clone(),
            a,
            b,
            AlphaMatte::constant(4, 4, 0.0).unwrap(),
            Mask::empty(4, 4).unwrap(),
        );
        assert!(r.is_err());
        assert!(AlphaMatte::new(1, 1, vec![1.5]).is_err());
    }

    #[test]
    fn clips_composite_with_offsets() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let (w, h) = (6, 4);
        let plate = FrameImage::filled(w, h, [0.2; 3]).unwrap();
        io::save_frame(&plate, d.join("cp.png")).unwrap();
        let mut scene = CompositeSceneFile {
            clean_plate: vec!["cp.png".into()],
            background: vec![],
            foreground: vec![],
            alpha: vec![],
            gt_amodal: vec![],
            offsets: ClipOffsets {
                foreground: 1,
                ..Default::default()
            },
            frame_count: None,
        };
        for k in 0..3 {
            let bg = format!("bg{k}.png");
            let fg = format!("fg{k}.png");
            let al = format!("a{k}.png");
            let am = format!("m{k}.png");
            io::save_frame(&FrameImage::filled(w, h, [0.4; 3]).unwrap(), d.join(&bg)).unwrap();
            io::save_frame(&FrameImage::filled(w, h, [k as f64 / 4.0; 3]).unwrap(), d.join(&fg)).unwrap();
            io::save_alpha(&AlphaMatte::from_fn(w, h, |x, _| if x < k { 1.0 } else { 0.0 }).unwrap(), d.join(&al)).unwrap();
            io::save_mask(&Mask::from_fn(w, h, |x, y| x < 4 && y < 3).unwrap(), d.join(&am)).unwrap();
            scene.background.push(bg);
            scene.foreground.push(fg);
            scene.alpha.push(al);
            scene.gt_amodal.push(am);
        }
        io::write_json(d.join("scene.json"), &scene).unwrap();
        let out = d.join("out");
        let path = composite_clips(&d.join("scene.json"), &CompositeConfig::default(), &out).unwrap();
        let m: SequenceManifest = io::read_json(&path).unwrap();
        assert_eq!(m.frame_count, 2);
        // output frame 1 takes foreground clip frame 2: opaque on x < 2
        let f = io::load_frame(out.join("frames/00001.png")).unwrap();
        assert_eq!(f.get(0, 0), [128.0 / 255.0; 3]);
        assert_eq!(f.get(3, 0), [102.0 / 255.0; 3]);
        let vis = io::load_mask(out.join("gt_visible/00001.png")).unwrap();
        assert_eq!(vis, Mask::from_fn(w, h, |x, y| (2..4).contains(&x) && y < 3).unwrap());

        scene.frame_count = Some(3);
        io::write_json(d.join("scene.json"), &scene).unwrap();
        assert!(composite_clips(&d.join("scene.json"), &CompositeConfig::default(), &out).is_err());
    }
}
