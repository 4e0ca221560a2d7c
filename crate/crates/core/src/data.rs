//! Canonical in-memory types shared by every stage.
//!
//! Pixel coordinates are `(x, y)` with `x` growing rightward and `y` growing
//! downward; storage is row-major.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width, height and frame count of one video sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoGeometry {
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
}

impl VideoGeometry {
    pub fn new(width: usize, height: usize, frame_count: usize) -> Result<Self> {
        if width == 0 || height == 0 || frame_count == 0 {
            return Err(Error::InvalidInput(format!(
                "geometry must be positive, got {width}x{height}x{frame_count}"
            )));
        }
        Ok(Self {
            width,
            height,
            frame_count,
        })
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }
}

impl std::fmt::Display for VideoGeometry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.width, self.height, self.frame_count)
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidInput(format!(
            "frame dimensions must be positive, got {width}x{height}"
        )));
    }
    Ok(())
}

/// RGB frame with channels normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameImage {
    width: usize,
    height: usize,
    data: Vec<[f64; 3]>,
}

impl FrameImage {
    pub fn filled(width: usize, height: usize, color: [f64; 3]) -> Result<Self> {
        check_dims(width, height)?;
        check_color(color)?;
        Ok(Self {
            width,
            height,
            data: vec![color; width * height],
        })
    }

    pub fn from_pixels(width: usize, height: usize, data: Vec<[f64; 3]>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::geometry(
                format!("{} pixels", width * height),
                format!("{} pixels", data.len()),
            ));
        }
        for &c in &data {
            check_color(c)?;
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        check_dims(width, height)?;
        if bytes.len() != width * height * 3 {
            return Err(Error::geometry(
                format!("{} bytes", width * height * 3),
                format!("{} bytes", bytes.len()),
            ));
        }
        let data = bytes
            .chunks_exact(3)
            .map(|p| [p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0])
            .collect();
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Quantizes to 8 bits per channel, rounding to nearest.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data
            .iter()
            .flat_map(|c| c.map(quantize))
            .collect()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.data[y * self.width + x]
    }

    /// Writes a pixel, clamping each channel into `[0, 1]`.
    pub fn set(&mut self, x: usize, y: usize, color: [f64; 3]) {
        self.data[y * self.width + x] = color.map(|v| v.clamp(0.0, 1.0));
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.data
    }
}

pub(crate) fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn check_color(c: [f64; 3]) -> Result<()> {
    if c.iter().all(|v| (0.0..=1.0).contains(v)) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("color {c:?} outside [0,1]")))
    }
}

/// Binary per-pixel mask. An all-false mask is legal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn empty(width: usize, height: usize) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            bits: vec![false; width * height],
        })
    }

    pub fn full(width: usize, height: usize) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            bits: vec![true; width * height],
        })
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        check_dims(width, height)?;
        if bits.len() != width * height {
            return Err(Error::geometry(
                format!("{} pixels", width * height),
                format!("{} pixels", bits.len()),
            ));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self> {
        check_dims(width, height)?;
        let bits = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Signed lookup; anything outside the image reads as `false`.
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            false
        } else {
            self.get(x as usize, y as usize)
        }
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn area(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Iterates `(x, y)` of every true pixel in row-major order.
    pub fn iter_true(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }

    fn ensure_same_dims(&self, other: &Mask) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::geometry(
                format!("{}x{}", self.width, self.height),
                format!("{}x{}", other.width, other.height),
            ));
        }
        Ok(())
    }

    fn zip_with(&self, other: &Mask, f: impl Fn(bool, bool) -> bool) -> Result<Mask> {
        self.ensure_same_dims(other)?;
        Ok(Mask {
            width: self.width,
            height: self.height,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn and(&self, other: &Mask) -> Result<Mask> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn or(&self, other: &Mask) -> Result<Mask> {
        self.zip_with(other, |a, b| a || b)
    }

    /// Set difference `self ∖ other`.
    pub fn and_not(&self, other: &Mask) -> Result<Mask> {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn not(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn intersection_area(&self, other: &Mask) -> Result<usize> {
        self.ensure_same_dims(other)?;
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .filter(|(&a, &b)| a && b)
            .count())
    }

    pub fn is_subset_of(&self, other: &Mask) -> Result<bool> {
        self.ensure_same_dims(other)?;
        Ok(self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b))
    }
}

/// A fixed-geometry run of masks, one per frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskSequence {
    geometry: VideoGeometry,
    masks: Vec<Mask>,
}

impl MaskSequence {
    pub fn new(masks: Vec<Mask>) -> Result<Self> {
        let first = masks
            .first()
            .ok_or_else(|| Error::InvalidInput("mask sequence must have at least one frame".into()))?;
        let (w, h) = first.dims();
        for (i, m) in masks.iter().enumerate() {
            if m.dims() != (w, h) {
                return Err(Error::geometry(
                    format!("{w}x{h}"),
                    format!("{}x{} at frame {i}", m.width(), m.height()),
                ));
            }
        }
        let geometry = VideoGeometry::new(w, h, masks.len())?;
        Ok(Self { geometry, masks })
    }

    pub fn geometry(&self) -> VideoGeometry {
        self.geometry
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn masks(&self) -> &[Mask] {
        &self.masks
    }

    pub fn get(&self, i: usize) -> &Mask {
        &self.masks[i]
    }

    pub fn into_masks(self) -> Vec<Mask> {
        self.masks
    }
}

/// Sign convention of a depth source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DepthConvention {
    /// Larger value means closer to the camera.
    Nearness,
    /// Larger value means farther from the camera.
    Metric,
}

impl std::str::FromStr for DepthConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearness" => Ok(Self::Nearness),
            "metric" => Ok(Self::Metric),
            other => Err(Error::InvalidInput(format!("unknown depth convention `{other}`"))),
        }
    }
}

/// Per-pixel proximity field, always stored with larger = closer.
#[derive(Debug, Clone, PartialEq)]
pub struct NearnessMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl NearnessMap {
    /// Builds a canonical map from raw values in the given convention.
    pub fn from_values(
        width: usize,
        height: usize,
        values: Vec<f64>,
        convention: DepthConvention,
    ) -> Result<Self> {
        check_dims(width, height)?;
        if values.len() != width * height {
            return Err(Error::geometry(
                format!("{} values", width * height),
                format!("{} values", values.len()),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite depth value at index {i}"
            )));
        }
        let values = match convention {
            DepthConvention::Nearness => values,
            DepthConvention::Metric => values.into_iter().map(|v| -v).collect(),
        };
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let values = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self::from_values(width, height, values, DepthConvention::Nearness)
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::from_values(width, height, vec![value; width * height], DepthConvention::Nearness)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
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

    /// Bilinear sample at real pixel-center coordinates, clamped to the image.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Min-max rescale to `[0, 1]`; a constant field maps to all zeros.
    pub fn normalized(&self) -> NearnessMap {
        let (lo, hi) = self
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let span = hi - lo;
        let values = if span > 0.0 {
            self.values.iter().map(|v| (v - lo) / span).collect()
        } else {
            vec![0.0; self.values.len()]
        };
        NearnessMap {
            width: self.width,
            height: self.height,
            values,
        }
    }

    /// Mean over the true pixels of `mask`; `None` when the mask is empty.
    pub fn mean_over(&self, mask: &Mask) -> Option<f64> {
        let (sum, n) = mask
            .iter_true()
            .fold((0.0, 0usize), |(s, n), (x, y)| (s + self.get(x, y), n + 1));
        (n > 0).then(|| sum / n as f64)
    }
}
