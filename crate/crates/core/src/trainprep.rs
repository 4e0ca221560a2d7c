//! Fine-tuning sample preparation: the object isolated on white, seeded
//! random occluding masks (thick strokes and rectangles), the conditioning
//! input with masked pixels blanked, and the per-frame loss bit.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FrameImage, Mask, MaskSequence};
use crate::error::{Error, Result};
use crate::io;
use crate::occlusion::OcclusionVerdict;

pub const PROMPT_TEMPLATE: &str = "A video of a [V] on a white background";
pub const DEFAULT_TOKEN: &str = "sks";
pub const WHITE: [f64; 3] = [1.0; 3];
pub const BLANK: [f64; 3] = [0.0; 3];

pub fn prompt_for(token: &str) -> String {
    PROMPT_TEMPLATE.replace("[V]", token)
}

/// Inclusive integer range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Span {
    pub min: usize,
    pub max: usize,
}

impl Span {
    pub const fn new(min: usize, max: usize) -> Self {
        Self { min, max }
    }

    fn draw(&self, rng: &mut impl Rng) -> usize {
        rng.random_range(self.min..=self.max)
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.min > self.max {
            return Err(Error::Config(format!("{name}: min {} exceeds max {}", self.min, self.max)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskGenConfig {
    pub seed: u64,
    /// Strokes per generated mask.
    pub strokes_per_mask: Span,
    /// Stroke thickness in pixels.
    pub stroke_width: Span,
    pub rectangles_per_mask: Span,
    /// Each object-occluding mask must cover at least this share of the object.
    pub min_object_overlap_fraction: f64,
    /// Masks kept fully off the object.
    pub background_mask_count: Span,
    /// Object-occluding masks per frame.
    pub object_mask_count: Span,
    /// Vertices per stroke polyline.
    pub stroke_vertices: Span,
}

impl Default for MaskGenConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            strokes_per_mask: Span::new(1, 3),
            stroke_width: Span::new(3, 9),
            rectangles_per_mask: Span::new(0, 2),
            min_object_overlap_fraction: 0.1,
            background_mask_count: Span::new(1, 2),
            object_mask_count: Span::new(1, 1),
            stroke_vertices: Span::new(2, 5),
        }
    }
}

impl MaskGenConfig {
    pub fn validate(&self) -> Result<()> {
        self.strokes_per_mask.validate("strokes_per_mask")?;
        self.stroke_width.validate("stroke_width")?;
        self.rectangles_per_mask.validate("rectangles_per_mask")?;
        self.background_mask_count.validate("background_mask_count")?;
        self.object_mask_count.validate("object_mask_count")?;
        self.stroke_vertices.validate("stroke_vertices")?;
        if self.stroke_width.min == 0 {
            return Err(Error::Config("stroke width must be at least 1".into()));
        }
        if self.stroke_vertices.min < 2 {
            return Err(Error::Config("strokes need at least 2 vertices".into()));
        }
        if !(0.0..=1.0).contains(&self.min_object_overlap_fraction) {
            return Err(Error::Config(format!(
                "min object overlap fraction must be in [0,1], got {}",
                self.min_object_overlap_fraction
            )));
        }
        if self.strokes_per_mask.max == 0 && self.rectangles_per_mask.max == 0 {
            return Err(Error::Config("masks need at least one stroke or rectangle".into()));
        }
        Ok(())
    }

    fn rng_for(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Object pixels copied, everything else white.
pub fn isolate_on_white(frame: &FrameImage, visible: &Mask) -> Result<FrameImage> {
    if frame.dims() != visible.dims() {
        return Err(Error::geometry(
            format!("{}x{}", frame.width(), frame.height()),
            format!("{}x{} mask", visible.width(), visible.height()),
        ));
    }
    let mut out = frame.clone();
    for y in 0..frame.height() {
        for x in 0..frame.width() {
            if !visible.get(x, y) {
                out.set(x, y, WHITE);
            }
        }
    }
    Ok(out)
}

/// `(1 − m) ⊙ x`: masked pixels set to zero.
pub fn apply_random_mask(image: &FrameImage, mask: &Mask) -> Result<FrameImage> {
    if image.dims() != mask.dims() {
        return Err(Error::geometry(
            format!("{}x{}", image.width(), image.height()),
            format!("{}x{} mask", mask.width(), mask.height()),
        ));
    }
    let mut out = image.clone();
    for (x, y) in mask.iter_true() {
        out.set(x, y, BLANK);
    }
    Ok(out)
}

fn paint_disc(mask: &mut Mask, cx: f64, cy: f64, radius: f64) {
    let (w, h) = mask.dims();
    let x_lo = (cx - radius).floor().max(0.0) as usize;
    let y_lo = (cy - radius).floor().max(0.0) as usize;
    let x_hi = ((cx + radius).ceil().max(0.0) as usize).min(w - 1);
    let y_hi = ((cy + radius).ceil().max(0.0) as usize).min(h - 1);
    let r2 = radius * radius;
    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            if dx * dx + dy * dy <= r2 {
                mask.set(x, y, true);
            }
        }
    }
}

fn paint_stroke(mask: &mut Mask, from: (f64, f64), to: (f64, f64), width: usize) {
    let radius = (width as f64 / 2.0).max(0.5);
    let len = (to.0 - from.0).hypot(to.1 - from.1);
    let steps = (len * 2.0).ceil().max(1.0) as usize;
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        paint_disc(mask, from.0 + (to.0 - from.0) * t, from.1 + (to.1 - from.1) * t, radius);
    }
}

/// A union of random strokes and rectangles. Each shape is anchored at a
/// point drawn from `anchors` when given, anywhere in the image otherwise.
fn random_shape_mask(config: &MaskGenConfig, rng: &mut ChaCha8Rng, w: usize, h: usize, anchors: &[(usize, usize)]) -> Mask {
    let mut mask = Mask::empty(w, h).expect("dims are positive");
    let max_len = (w.max(h) as f64 / 3.0).max(2.0);
    let anchor = |rng: &mut ChaCha8Rng| -> (f64, f64) {
        if anchors.is_empty() {
            (rng.random_range(0..w) as f64, rng.random_range(0..h) as f64)
        } else {
            let (x, y) = anchors[rng.random_range(0..anchors.len())];
            (x as f64, y as f64)
        }
    };
    let mut strokes = config.strokes_per_mask.draw(rng);
    let rects = config.rectangles_per_mask.draw(rng);
    if strokes + rects == 0 {
        strokes = 1;
    }
    for _ in 0..strokes {
        let width = config.stroke_width.draw(rng);
        let vertices = config.stroke_vertices.draw(rng);
        let mut p = anchor(rng);
        paint_disc(&mut mask, p.0, p.1, (width as f64 / 2.0).max(0.5));
        for _ in 1..vertices {
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let len = rng.random_range(1.0..max_len);
            let q = (
                (p.0 + angle.cos() * len).clamp(0.0, (w - 1) as f64),
                (p.1 + angle.sin() * len).clamp(0.0, (h - 1) as f64),
            );
            paint_stroke(&mut mask, p, q, width);
            p = q;
        }
    }
    for _ in 0..rects {
        let (cx, cy) = anchor(rng);
        let rw = rng.random_range(1..=(w / 4).max(1)) as f64;
        let rh = rng.random_range(1..=(h / 4).max(1)) as f64;
        let x0 = (cx - rw / 2.0).floor().max(0.0) as usize;
        let y0 = (cy - rh / 2.0).floor().max(0.0) as usize;
        let x1 = ((cx + rw / 2.0).ceil() as usize).min(w);
        let y1 = ((cy + rh / 2.0).ceil() as usize).min(h);
        for y in y0..y1.max(y0 + 1).min(h) {
            for x in x0..x1.max(x0 + 1).min(w) {
                mask.set(x, y, true);
            }
        }
    }
    mask
}

const MAX_ATTEMPTS: usize = 64;

fn object_occluding_mask(config: &MaskGenConfig, rng: &mut ChaCha8Rng, object: &Mask) -> Mask {
    let (w, h) = object.dims();
    let pixels: Vec<(usize, usize)> = object.iter_true().collect();
    let needed = (config.min_object_overlap_fraction * pixels.len() as f64).ceil() as usize;
    let mut mask = random_shape_mask(config, rng, w, h, &pixels);
    let mut attempts = 0;
    while mask.intersection_area(object).expect("same dims") < needed && attempts < MAX_ATTEMPTS {
        let more = random_shape_mask(config, rng, w, h, &pixels);
        mask = mask.or(&more).expect("same dims");
        attempts += 1;
    }
    if mask.intersection_area(object).expect("same dims") < needed {
        // still short: take object pixels in random order until covered
        let mut order = pixels;
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        for (x, y) in order {
            if mask.intersection_area(object).expect("same dims") >= needed {
                break;
            }
            mask.set(x, y, true);
        }
    }
    mask
}

fn background_mask(config: &MaskGenConfig, rng: &mut ChaCha8Rng, object: &Mask) -> Result<Mask> {
    let (w, h) = object.dims();
    let free: Vec<(usize, usize)> = object.not().iter_true().collect();
    if free.is_empty() {
        return Err(Error::InvalidInput("object covers the whole frame; no room for background masks".into()));
    }
    for _ in 0..MAX_ATTEMPTS {
        let m = random_shape_mask(config, rng, w, h, &free).and_not(object)?;
        if !m.is_empty() {
            return Ok(m);
        }
    }
    let mut m = Mask::empty(w, h)?;
    let (x, y) = free[rng.random_range(0..free.len())];
    m.set(x, y, true);
    Ok(m)
}

fn generate_with(config: &MaskGenConfig, rng: &mut ChaCha8Rng, object: &Mask) -> Result<Vec<Mask>> {
    let mut masks = Vec::new();
    if !object.is_empty() {
        for _ in 0..config.object_mask_count.draw(rng) {
            masks.push(object_occluding_mask(config, rng, object));
        }
    }
    let (w, h) = object.dims();
    for _ in 0..config.background_mask_count.draw(rng) {
        if object.is_empty() {
            masks.push(random_shape_mask(config, rng, w, h, &[]));
        } else {
            masks.push(background_mask(config, rng, object)?);
        }
    }
    Ok(masks)
}

/// Random masks for one object: the object-occluding ones first (each
/// covering at least `min_object_overlap_fraction` of the object), then the
/// background ones (disjoint from the object). Deterministic in
/// `(config, object_mask)`.
pub fn generate_training_masks(config: &MaskGenConfig, object_mask: &Mask) -> Result<Vec<Mask>> {
    config.validate()?;
    if object_mask.is_empty() {
        return Err(Error::EmptyMask("training masks need a nonempty object mask"));
    }
    generate_with(config, &mut config.rng_for(0), object_mask)
}

/// Union of all random masks for frame `frame`, from an RNG stream of its own.
pub fn frame_random_mask(config: &MaskGenConfig, object_mask: &Mask, frame: usize) -> Result<Mask> {
    config.validate()?;
    let (w, h) = object_mask.dims();
    let masks = generate_with(config, &mut config.rng_for(frame as u64 + 1), object_mask)?;
    masks.iter().try_fold(Mask::empty(w, h)?, |acc, m| acc.or(m))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub frame: usize,
    pub input_image: FrameImage,
    pub random_mask: Mask,
    pub masked_input: FrameImage,
    pub loss_bit: u8,
    pub prompt: String,
}

/// Downstream fine-tuning defaults carried in the manifest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinetuneHyperparameters {
    pub steps: u32,
    pub resolution: [u32; 2],
    pub learning_rate: f64,
    pub batch_size: u32,
    pub sequence_length: u32,
}

impl Default for FinetuneHyperparameters {
    fn default() -> Self {
        Self {
            steps: 500,
            resolution: [512, 512],
            learning_rate: 1e-3,
            batch_size: 1,
            sequence_length: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFrame {
    pub frame: usize,
    pub input_image: String,
    pub random_mask: String,
    pub masked_input: String,
    pub visible_mask: String,
    #[serde(rename = "V")]
    pub loss_bit: u8,
}

pub const FINETUNE_MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneManifest {
    pub version: u32,
    pub prompt: String,
    pub token: String,
    pub width: usize,
    pub height: usize,
    pub hyperparameters: FinetuneHyperparameters,
    pub mask_generation: MaskGenConfig,
    pub frames: Vec<ManifestFrame>,
}

/// Builds one sample per frame; every frame is kept as context and the loss
/// bit is copied from the verdict.
pub fn build_training_samples(
    frames: &[FrameImage],
    visible: &MaskSequence,
    verdicts: &[OcclusionVerdict],
    config: &MaskGenConfig,
    token: &str,
) -> Result<Vec<TrainSample>> {
    config.validate()?;
    if frames.len() != visible.len() || verdicts.len() != visible.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch: {} frames, {} masks, {} verdicts",
            frames.len(),
            visible.len(),
            verdicts.len()
        )));
    }
    let prompt = prompt_for(token);
    frames
        .iter()
        .zip(visible.masks())
        .zip(verdicts)
        .enumerate()
        .map(|(i, ((frame, vis), verdict))| {
            let input_image = isolate_on_white(frame, vis)?;
            let random_mask = frame_random_mask(config, vis, i)?;
            let masked_input = apply_random_mask(&input_image, &random_mask)?;
            Ok(TrainSample {
                frame: i,
                input_image,
                random_mask,
                masked_input,
                loss_bit: verdict.v(),
                prompt: prompt.clone(),
            })
        })
        .collect()
}

pub const MANIFEST_FILE: &str = "finetune_manifest.json";

/// Writes sample images and masks under `out_dir` and the manifest beside
/// them. Paths in the manifest are relative to `out_dir`.
pub fn write_training_manifest(
    samples: &[TrainSample],
    visible: &MaskSequence,
    config: &MaskGenConfig,
    token: &str,
    out_dir: &Path,
) -> Result<FinetuneManifest> {
    let geometry = visible.geometry();
    let mut frames = Vec::with_capacity(samples.len());
    for s in samples {
        let entry = ManifestFrame {
            frame: s.frame,
            input_image: format!("input/{:05}.png", s.frame),
            random_mask: format!("random_mask/{:05}.png", s.frame),
            masked_input: format!("masked_input/{:05}.png", s.frame),
            visible_mask: format!("visible_mask/{:05}.png", s.frame),
            loss_bit: s.loss_bit,
        };
        io::save_frame(&s.input_image, out_dir.join(&entry.input_image))?;
        io::save_mask(&s.random_mask, out_dir.join(&entry.random_mask))?;
        io::save_frame(&s.masked_input, out_dir.join(&entry.masked_input))?;
        io::save_mask(visible.get(s.frame), out_dir.join(&entry.visible_mask))?;
        frames.push(entry);
    }
    let manifest = FinetuneManifest {
        version: FINETUNE_MANIFEST_VERSION,
        prompt: prompt_for(token),
        token: token.to_string(),
        width: geometry.width,
        height: geometry.height,
        hyperparameters: FinetuneHyperparameters::default(),
        mask_generation: *config,
        frames,
    };
    io::write_json(out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}
