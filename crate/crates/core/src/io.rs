//! File formats: 8-bit grayscale masks, RGB frames, raw float32 nearness
//! with a JSON sidecar header, and JSON documents.

use std::fs;
use std::path::{Path, PathBuf};

use image::{ColorType, DynamicImage, GrayImage, ImageReader, RgbImage};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::composite::AlphaMatte;
use crate::data::{DepthConvention, FrameImage, Mask, NearnessMap};
use crate::error::{Error, Result};

fn open_image(path: &Path) -> Result<DynamicImage> {
    let reader = ImageReader::open(path).map_err(|e| Error::io(path, e))?;
    let reader = reader.with_guessed_format().map_err(|e| Error::io(path, e))?;
    reader.decode().map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    Ok(())
}

/// Reads an 8-bit single-channel mask; nonzero means inside.
pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let path = path.as_ref();
    let img = open_image(path)?;
    if img.color() != ColorType::L8 {
        return Err(Error::InvalidInput(format!(
            "{}: mask must be 8-bit single-channel, found {:?}",
            path.display(),
            img.color()
        )));
    }
    let gray = img.into_luma8();
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    Mask::from_bits(w, h, gray.into_raw().into_iter().map(|v| v != 0).collect())
}

/// [`load_mask`] plus a dimension check against the expected geometry.
pub fn load_mask_sized(path: impl AsRef<Path>, width: usize, height: usize) -> Result<Mask> {
    let path = path.as_ref();
    let mask = load_mask(path)?;
    if mask.dims() != (width, height) {
        return Err(Error::geometry(
            format!("{width}x{height}"),
            format!("{}x{} in {}", mask.width(), mask.height(), path.display()),
        ));
    }
    Ok(mask)
}

/// Writes a mask as 8-bit grayscale PNG (0 / 255).
pub fn save_mask(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    ensure_parent(path)?;
    let raw = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    let img = GrayImage::from_raw(mask.width() as u32, mask.height() as u32, raw)
        .expect("buffer length matches dimensions");
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

/// Reads an 8-bit single-channel alpha matte, `value / 255`.
pub fn load_alpha(path: impl AsRef<Path>) -> Result<AlphaMatte> {
    let path = path.as_ref();
    let img = open_image(path)?;
    if img.color() != ColorType::L8 {
        return Err(Error::InvalidInput(format!(
            "{}: alpha matte must be 8-bit single-channel, found {:?}",
            path.display(),
            img.color()
        )));
    }
    let gray = img.into_luma8();
    AlphaMatte::from_u8(gray.width() as usize, gray.height() as usize, gray.as_raw())
}

/// Writes an alpha matte as 8-bit grayscale PNG.
pub fn save_alpha(alpha: &AlphaMatte, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    ensure_parent(path)?;
    let (w, h) = alpha.dims();
    let raw = alpha.values().iter().map(|&a| crate::data::quantize(a)).collect();
    let img = GrayImage::from_raw(w as u32, h as u32, raw).expect("buffer length matches dimensions");
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

/// Reads an RGB(A) or grayscale frame and normalizes channels to `[0, 1]`.
/// Alpha, if present, is dropped.
pub fn load_frame(path: impl AsRef<Path>) -> Result<FrameImage> {
    let path = path.as_ref();
    let rgb = open_image(path)?.into_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    FrameImage::from_rgb8(w, h, rgb.as_raw())
}

pub fn load_frame_sized(path: impl AsRef<Path>, width: usize, height: usize) -> Result<FrameImage> {
    let path = path.as_ref();
    let frame = load_frame(path)?;
    if frame.dims() != (width, height) {
        return Err(Error::geometry(
            format!("{width}x{height}"),
            format!("{}x{} in {}", frame.width(), frame.height(), path.display()),
        ));
    }
    Ok(frame)
}

pub fn save_frame(frame: &FrameImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    ensure_parent(path)?;
    let img = RgbImage::from_raw(frame.width() as u32, frame.height() as u32, frame.to_rgb8())
        .expect("buffer length matches dimensions");
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

/// Sidecar header for a raw float32 nearness file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NearnessHeader {
    pub width: usize,
    pub height: usize,
    pub convention: String,
}

/// `<stem>.f32` and `<stem>.json` for a nearness stem path.
pub fn nearness_paths(stem: impl AsRef<Path>) -> (PathBuf, PathBuf) {
    let stem = stem.as_ref();
    (stem.with_extension("f32"), stem.with_extension("json"))
}

/// Reads raw little-endian float32 data using the JSON header's size and
/// convention; metric sources are negated into nearness.
pub fn load_nearness(data_path: impl AsRef<Path>, header_path: impl AsRef<Path>) -> Result<NearnessMap> {
    let data_path = data_path.as_ref();
    let header_path = header_path.as_ref();
    let header: serde_json::Value = read_json(header_path)?;
    let field = |name: &str| {
        header
            .get(name)
            .ok_or_else(|| Error::InvalidInput(format!("{}: missing `{name}`", header_path.display())))
    };
    let width = field("width")?
        .as_u64()
        .ok_or_else(|| Error::InvalidInput("nearness header `width` must be an integer".into()))?
        as usize;
    let height = field("height")?
        .as_u64()
        .ok_or_else(|| Error::InvalidInput("nearness header `height` must be an integer".into()))?
        as usize;
    let convention: DepthConvention = field("convention")?
        .as_str()
        .ok_or_else(|| Error::InvalidInput("nearness header `convention` must be a string".into()))?
        .parse()?;

    let bytes = fs::read(data_path).map_err(|e| Error::io(data_path, e))?;
    let expected = width * height * 4;
    if bytes.len() != expected {
        return Err(Error::geometry(
            format!("{expected} bytes for {width}x{height}"),
            format!("{} bytes in {}", bytes.len(), data_path.display()),
        ));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    NearnessMap::from_values(width, height, values, convention)
}

/// Writes a nearness map with a `"nearness"` header.
pub fn save_nearness(map: &NearnessMap, data_path: impl AsRef<Path>, header_path: impl AsRef<Path>) -> Result<()> {
    let data_path = data_path.as_ref();
    ensure_parent(data_path)?;
    let bytes: Vec<u8> = map
        .values()
        .iter()
        .flat_map(|&v| (v as f32).to_le_bytes())
        .collect();
    fs::write(data_path, bytes).map_err(|e| Error::io(data_path, e))?;
    write_json(
        header_path,
        &NearnessHeader {
            width: map.width(),
            height: map.height(),
            convention: "nearness".into(),
        },
    )
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

/// Pretty-printed JSON with a trailing newline. Output is deterministic for
/// deterministic values.
pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
