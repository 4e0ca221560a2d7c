//! Occlusion reasoning on a visible mask and its nearness field.
//!
//! A boundary pixel is a likely occlusion boundary when nearness increases
//! along the outward normal, i.e. something closer sits just outside the
//! mask. The occlusion fraction is the arc-length-weighted share of such
//! pixels over the whole boundary.

use serde::{Deserialize, Serialize};

use crate::bbox::AmodalBox;
use crate::data::{Mask, MaskSequence, NearnessMap};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    #[default]
    #[serde(rename = "4")]
    Four,
    #[serde(rename = "8")]
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(i64, i64)] {
        const FOUR: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];
        const EIGHT: [(i64, i64); 8] = [
            (1, 0),
            (0, 1),
            (-1, 0),
            (0, -1),
            (1, 1),
            (-1, 1),
            (-1, -1),
            (1, -1),
        ];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(Error::Config(format!("connectivity must be 4 or 8, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OcclusionConfig {
    /// `t`: minimum outward nearness derivative that counts as occlusion.
    pub derivative_threshold: f64,
    /// `τ`: frames with `f_occ` below this are unoccluded.
    pub occlusion_fraction_threshold: f64,
    /// Finite-difference step along the normal, in pixels.
    pub probe_distance: f64,
    pub boundary_connectivity: Connectivity,
    /// Min-max normalize each frame's nearness to `[0, 1]` before differencing.
    pub normalize_nearness: bool,
}

impl Default for OcclusionConfig {
    fn default() -> Self {
        Self {
            derivative_threshold: 0.05,
            occlusion_fraction_threshold: 0.2,
            probe_distance: 2.0,
            boundary_connectivity: Connectivity::Four,
            normalize_nearness: true,
        }
    }
}

impl OcclusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.derivative_threshold >= 0.0 && self.derivative_threshold.is_finite()) {
            return Err(Error::Config(format!(
                "derivative threshold must be finite and >= 0, got {}",
                self.derivative_threshold
            )));
        }
        let tau = self.occlusion_fraction_threshold;
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::Config(format!("occlusion fraction threshold must be in (0,1), got {tau}")));
        }
        if !(self.probe_distance >= 1.0 && self.probe_distance.is_finite()) {
            return Err(Error::Config(format!(
                "probe distance must be >= 1 pixel, got {}",
                self.probe_distance
            )));
        }
        Ok(())
    }
}

/// Boundary pixel with its outward normal and arc-length weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub x: usize,
    pub y: usize,
    pub normal: [f64; 2],
    pub arc_weight: f64,
}

/// A boundary point evaluated against a nearness field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySample {
    pub point: BoundaryPoint,
    pub directional_derivative: f64,
    /// True iff `directional_derivative > t`.
    pub flag: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OcclusionLabel {
    Unoccluded,
    Occluded,
    OutOfFrame,
}

/// Per-frame occlusion verdict. `V` is 1 exactly when the frame is unoccluded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawVerdict", into = "RawVerdict")]
pub struct OcclusionVerdict {
    frame: usize,
    f_occ: Option<f64>,
    label: OcclusionLabel,
}

#[derive(Serialize, Deserialize)]
struct RawVerdict {
    frame: usize,
    f_occ: Option<f64>,
    label: OcclusionLabel,
    #[serde(rename = "V")]
    v: u8,
}

impl TryFrom<RawVerdict> for OcclusionVerdict {
    type Error = Error;

    fn try_from(raw: RawVerdict) -> Result<Self> {
        let verdict = OcclusionVerdict::new(raw.frame, raw.f_occ, raw.label)?;
        if verdict.v() != raw.v {
            return Err(Error::InvalidInput(format!(
                "frame {}: V={} inconsistent with label {:?}",
                raw.frame, raw.v, raw.label
            )));
        }
        Ok(verdict)
    }
}

impl From<OcclusionVerdict> for RawVerdict {
    fn from(v: OcclusionVerdict) -> Self {
        RawVerdict {
            frame: v.frame,
            f_occ: v.f_occ,
            label: v.label,
            v: v.v(),
        }
    }
}

impl OcclusionVerdict {
    pub fn new(frame: usize, f_occ: Option<f64>, label: OcclusionLabel) -> Result<Self> {
        match f_occ {
            Some(f) if !(0.0..=1.0).contains(&f) => {
                return Err(Error::InvalidInput(format!("frame {frame}: f_occ {f} outside [0,1]")))
            }
            None if label == OcclusionLabel::Unoccluded => {
                return Err(Error::InvalidInput(format!(
                    "frame {frame}: an empty visible mask cannot be unoccluded"
                )))
            }
            _ => {}
        }
        Ok(Self { frame, f_occ, label })
    }

    pub fn frame(&self) -> usize {
        self.frame
    }

    /// `None` when the visible mask was empty.
    pub fn f_occ(&self) -> Option<f64> {
        self.f_occ
    }

    pub fn label(&self) -> OcclusionLabel {
        self.label
    }

    pub fn v(&self) -> u8 {
        u8::from(self.label == OcclusionLabel::Unoccluded)
    }

    pub fn is_unoccluded(&self) -> bool {
        self.label == OcclusionLabel::Unoccluded
    }
}

const FAR: f64 = 1e20;

/// Squared 1-D distance transform (Felzenszwalb & Huttenlocher). Entries
/// without a feature hold `FAR`.
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let parabola = |q: usize| f[q] + (q * q) as f64;
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..f.len() {
        let mut s = (parabola(q) - parabola(v[k])) / (2.0 * (q - v[k]) as f64);
        while s <= z[k] {
            k -= 1;
            s = (parabola(q) - parabola(v[k])) / (2.0 * (q - v[k]) as f64);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Exact squared Euclidean distance from each cell to the nearest `feature`
/// cell; infinite when there are no features.
fn squared_edt(width: usize, height: usize, feature: impl Fn(usize, usize) -> bool) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..height)
        .flat_map(|y| (0..width).map(move |x| (x, y)))
        .map(|(x, y)| if feature(x, y) { 0.0 } else { FAR })
        .collect();
    let n = width.max(height);
    let mut f = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    for x in 0..width {
        for y in 0..height {
            f[y] = grid[y * width + x];
        }
        edt_1d(&f[..height], &mut out[..height], &mut v, &mut z);
        for y in 0..height {
            grid[y * width + x] = out[y];
        }
    }
    for y in 0..height {
        f[..width].copy_from_slice(&grid[y * width..(y + 1) * width]);
        edt_1d(&f[..width], &mut out[..width], &mut v, &mut z);
        grid[y * width..(y + 1) * width].copy_from_slice(&out[..width]);
    }
    for g in &mut grid {
        if *g >= FAR / 2.0 {
            *g = f64::INFINITY;
        }
    }
    grid
}

/// Signed distance field on the image padded by one pixel of "outside":
/// negative inside the mask, positive outside.
struct PaddedSdf {
    width: usize,
    values: Vec<f64>,
}

impl PaddedSdf {
    fn new(mask: &Mask) -> Self {
        let (w, h) = (mask.width() + 2, mask.height() + 2);
        let inside = |x: usize, y: usize| mask.get_signed(x as i64 - 1, y as i64 - 1);
        let to_outside = squared_edt(w, h, |x, y| !inside(x, y));
        let to_inside = squared_edt(w, h, inside);
        let values = (0..w * h)
            .map(|i| {
                let (x, y) = (i % w, i / w);
                if inside(x, y) {
                    -to_outside[i].sqrt()
                } else {
                    to_inside[i].sqrt()
                }
            })
            .collect();
        Self { width: w, values }
    }

    /// Value at image coordinates; valid for `-1..=width` and `-1..=height`.
    fn at(&self, x: i64, y: i64) -> f64 {
        self.values[(y + 1) as usize * self.width + (x + 1) as usize]
    }
}

fn is_boundary(mask: &Mask, x: usize, y: usize, connectivity: Connectivity) -> bool {
    mask.get(x, y)
        && connectivity
            .offsets()
            .iter()
            .any(|&(dx, dy)| !mask.get_signed(x as i64 + dx, y as i64 + dy))
}

fn unit(v: [f64; 2]) -> Option<[f64; 2]> {
    let n = v[0].hypot(v[1]);
    (n > 1e-12).then(|| [v[0] / n, v[1] / n])
}

/// Every mask pixel with a non-mask neighbor under the configured
/// connectivity (pixels outside the image count as non-mask), with outward
/// normals from the signed-distance gradient.
///
/// Arc weight is `1 / max(|n_x|, |n_y|)`: 1 on axis-aligned runs and √2 on
/// 45° runs, matching the boundary-pixel density of a digital line.
pub fn extract_boundary(mask: &Mask, config: &OcclusionConfig) -> Result<Vec<BoundaryPoint>> {
    if mask.is_empty() {
        return Err(Error::EmptyMask("boundary extraction needs a nonempty mask"));
    }
    let sdf = PaddedSdf::new(mask);
    let mut points = Vec::new();
    for (x, y) in mask.iter_true() {
        if !is_boundary(mask, x, y, config.boundary_connectivity) {
            continue;
        }
        let (xi, yi) = (x as i64, y as i64);
        let grad = [
            (sdf.at(xi + 1, yi) - sdf.at(xi - 1, yi)) / 2.0,
            (sdf.at(xi, yi + 1) - sdf.at(xi, yi - 1)) / 2.0,
        ];
        let normal = unit(grad)
            .or_else(|| {
                // symmetric thin structures: average direction to outside neighbors
                let sum = Connectivity::Eight.offsets().iter().fold([0.0, 0.0], |acc, &(dx, dy)| {
                    if mask.get_signed(xi + dx, yi + dy) {
                        acc
                    } else {
                        let u = unit([dx as f64, dy as f64]).unwrap();
                        [acc[0] + u[0], acc[1] + u[1]]
                    }
                });
                unit(sum)
            })
            .unwrap_or_else(|| {
                let &(dx, dy) = Connectivity::Eight
                    .offsets()
                    .iter()
                    .find(|&&(dx, dy)| !mask.get_signed(xi + dx, yi + dy))
                    .expect("boundary pixel has an outside neighbor");
                unit([dx as f64, dy as f64]).unwrap()
            });
        let arc_weight = 1.0 / normal[0].abs().max(normal[1].abs());
        points.push(BoundaryPoint {
            x,
            y,
            normal,
            arc_weight,
        });
    }
    Ok(points)
}

/// `(z(p + d·n) − z(p)) / d` with bilinear, border-clamped sampling.
pub fn directional_depth_derivative(nearness: &NearnessMap, point: &BoundaryPoint, probe_distance: f64) -> f64 {
    let (px, py) = (point.x as f64, point.y as f64);
    let qx = px + probe_distance * point.normal[0];
    let qy = py + probe_distance * point.normal[1];
    (nearness.sample_bilinear(qx, qy) - nearness.get(point.x, point.y)) / probe_distance
}

/// Probe clamped at the image border and landing back inside the mask: the
/// image edge says nothing about occlusion.
fn probe_trapped(mask: &Mask, point: &BoundaryPoint, probe_distance: f64) -> bool {
    let (w, h) = (mask.width() as f64, mask.height() as f64);
    let qx = point.x as f64 + probe_distance * point.normal[0];
    let qy = point.y as f64 + probe_distance * point.normal[1];
    let inside_image = (0.0..=w - 1.0).contains(&qx) && (0.0..=h - 1.0).contains(&qy);
    if inside_image {
        return false;
    }
    let cx = qx.clamp(0.0, w - 1.0).round() as usize;
    let cy = qy.clamp(0.0, h - 1.0).round() as usize;
    mask.get(cx, cy)
}

/// Evaluates every boundary point against the (optionally normalized) field.
pub fn evaluate_boundary(mask: &Mask, nearness: &NearnessMap, config: &OcclusionConfig) -> Result<Vec<BoundarySample>> {
    config.validate()?;
    if mask.dims() != nearness.dims() {
        return Err(Error::geometry(
            format!("{}x{}", mask.width(), mask.height()),
            format!("{}x{} nearness", nearness.width(), nearness.height()),
        ));
    }
    let normalized;
    let field = if config.normalize_nearness {
        normalized = nearness.normalized();
        &normalized
    } else {
        nearness
    };
    let points = extract_boundary(mask, config)?;
    Ok(points
        .into_iter()
        .map(|point| {
            let directional_derivative = if probe_trapped(mask, &point, config.probe_distance) {
                0.0
            } else {
                directional_depth_derivative(field, &point, config.probe_distance)
            };
            BoundarySample {
                point,
                directional_derivative,
                flag: directional_derivative > config.derivative_threshold,
            }
        })
        .collect())
}

/// Arc-length-weighted fraction of boundary flagged as occlusion.
pub fn occlusion_fraction(mask: &Mask, nearness: &NearnessMap, config: &OcclusionConfig) -> Result<f64> {
    let samples = evaluate_boundary(mask, nearness, config)?;
    let (flagged, total) = samples.iter().fold((0.0, 0.0), |(f, t), s| {
        let w = s.point.arc_weight;
        (if s.flag { f + w } else { f }, t + w)
    });
    Ok((flagged / total).clamp(0.0, 1.0))
}

/// Labels every frame. Empty visible masks are `OutOfFrame` when the
/// estimated box lies entirely outside the image and `Occluded` otherwise.
pub fn label_frames(
    visible: &MaskSequence,
    nearness: &[NearnessMap],
    boxes: Option<&[AmodalBox]>,
    config: &OcclusionConfig,
) -> Result<Vec<OcclusionVerdict>> {
    config.validate()?;
    if nearness.len() != visible.len() {
        return Err(Error::InvalidInput(format!(
            "{} visible masks but {} nearness maps",
            visible.len(),
            nearness.len()
        )));
    }
    if let Some(b) = boxes {
        if b.len() != visible.len() {
            return Err(Error::InvalidInput(format!(
                "{} visible masks but {} boxes",
                visible.len(),
                b.len()
            )));
        }
    }
    let geometry = visible.geometry();
    visible
        .masks()
        .iter()
        .zip(nearness)
        .enumerate()
        .map(|(i, (mask, z))| {
            if mask.is_empty() {
                let gone = boxes
                    .map(|b| b[i].is_outside_image(geometry.width, geometry.height))
                    .unwrap_or(false);
                let label = if gone {
                    OcclusionLabel::OutOfFrame
                } else {
                    OcclusionLabel::Occluded
                };
                return OcclusionVerdict::new(i, None, label);
            }
            let f = occlusion_fraction(mask, z, config)?;
            let label = if f < config.occlusion_fraction_threshold {
                OcclusionLabel::Unoccluded
            } else {
                OcclusionLabel::Occluded
            };
            OcclusionVerdict::new(i, Some(f), label)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bbox::{AmodalBox, Provenance};

    fn square(w: usize, h: usize, x0: usize, y0: usize, side: usize) -> Mask {
        Mask::from_fn(w, h, |x, y| (x0..x0 + side).contains(&x) && (y0..y0 + side).contains(&y)).unwrap()
    }

    fn brute_sq_edt(w: usize, h: usize, feature: &dyn Fn(usize, usize) -> bool) -> Vec<f64> {
        let feats: Vec<(usize, usize)> = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .filter(|&(x, y)| feature(x, y))
            .collect();
        (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| {
                feats
                    .iter()
                    .map(|&(fx, fy)| {
                        let dx = x as f64 - fx as f64;
                        let dy = y as f64 - fy as f64;
                        dx * dx + dy * dy
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    #[test]
    fn edt_matches_brute_force() {
        let mut state = 12345u64;
        for _ in 0..30 {
            let bits: Vec<bool> = (0..13 * 9)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    (state >> 33) % 7 == 0
                })
                .collect();
            let feature = |x: usize, y: usize| bits[y * 13 + x];
            let fast = squared_edt(13, 9, feature);
            let slow = brute_sq_edt(13, 9, &feature);
            assert_eq!(fast, slow);
        }
    }

    #[test]
    fn edt_without_features_is_infinite() {
        assert!(squared_edt(4, 3, |_, _| false).iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn empty_mask_is_rejected() {
        let m = Mask::empty(4, 4).unwrap();
        assert!(matches!(extract_boundary(&m, &OcclusionConfig::default()), Err(Error::EmptyMask(_))));
        let z = NearnessMap::constant(4, 4, 0.0).unwrap();
        assert!(occlusion_fraction(&m, &z, &OcclusionConfig::default()).is_err());
    }

    #[test]
    fn full_mask_boundary_is_image_border() {
        let m = Mask::full(6, 5).unwrap();
        let pts = extract_boundary(&m, &OcclusionConfig::default()).unwrap();
        assert_eq!(pts.len(), 2 * 6 + 2 * 5 - 4);
        for p in &pts {
            let on_border = p.x == 0 || p.y == 0 || p.x == 5 || p.y == 4;
            assert!(on_border);
            // normal points away from the image center
            let cx = p.x as f64 - 2.5;
            let cy = p.y as f64 - 2.0;
            assert!(p.normal[0] * cx + p.normal[1] * cy > 0.0, "{p:?}");
        }
        let left = pts.iter().find(|p| p.x == 0 && p.y == 2).unwrap();
        assert!((left.normal[0] + 1.0).abs() < 1e-9 && left.normal[1].abs() < 1e-9);
    }

    #[test]
    fn single_pixel_is_its_own_boundary() {
        let mut m = Mask::empty(5, 5).unwrap();
        m.set(2, 3, true);
        let pts = extract_boundary(&m, &OcclusionConfig::default()).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!((pts[0].x, pts[0].y), (2, 3));
        let n = pts[0].normal;
        assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-9);
        assert!(pts[0].arc_weight > 0.0);
    }

    #[test]
    fn square_boundary_and_normals() {
        let m = square(10, 10, 2, 2, 4);
        let pts = extract_boundary(&m, &OcclusionConfig::default()).unwrap();
        assert_eq!(pts.len(), 12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let find = |x, y| pts.iter().find(|p| p.x == x && p.y == y).unwrap().normal;
        let close = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9;
        assert!(close(find(2, 3), [-1.0, 0.0]));
        assert!(close(find(2, 4), [-1.0, 0.0]));
        assert!(close(find(5, 3), [1.0, 0.0]));
        assert!(close(find(3, 2), [0.0, -1.0]));
        assert!(close(find(4, 5), [0.0, 1.0]));
        assert!(close(find(2, 2), [-h, -h]));
        assert!(close(find(5, 2), [h, -h]));
        assert!(close(find(2, 5), [-h, h]));
        assert!(close(find(5, 5), [h, h]));
    }

    #[test]
    fn eight_connectivity_adds_inner_corners() {
        // plus sign: the 4-connected boundary skips nothing, but the center
        // of a 3x3 block with a notch has only a diagonal outside neighbor
        let m = Mask::from_fn(7, 7, |x, y| (1..6).contains(&x) && (1..6).contains(&y) && !(x == 5 && y == 5))
            .unwrap();
        let four = extract_boundary(&m, &OcclusionConfig::default()).unwrap();
        let eight = extract_boundary(
            &m,
            &OcclusionConfig {
                boundary_connectivity: Connectivity::Eight,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(eight.len() > four.len());
        assert!(eight.iter().any(|p| (p.x, p.y) == (4, 4)));
        assert!(!four.iter().any(|p| (p.x, p.y) == (4, 4)));
    }

    #[test]
    fn derivative_on_flat_and_linear_fields() {
        let flat = NearnessMap::constant(8, 8, 0.3).unwrap();
        let ramp = NearnessMap::from_fn(8, 8, |x, _| x as f64).unwrap();
        let right = BoundaryPoint {
            x: 5,
            y: 4,
            normal: [1.0, 0.0],
            arc_weight: 1.0,
        };
        let left = BoundaryPoint {
            x: 2,
            y: 4,
            normal: [-1.0, 0.0],
            arc_weight: 1.0,
        };
        assert_eq!(directional_depth_derivative(&flat, &right, 1.0), 0.0);
        assert_eq!(directional_depth_derivative(&ramp, &right, 1.0), 1.0);
        assert_eq!(directional_depth_derivative(&ramp, &left, 1.0), -1.0);
        // clamped probe at the right border
        let edge = BoundaryPoint { x: 7, ..right };
        assert_eq!(directional_depth_derivative(&ramp, &edge, 2.0), 0.0);
    }

    #[test]
    fn constant_field_gives_zero_fraction() {
        let m = square(12, 12, 3, 4, 5);
        let z = NearnessMap::constant(12, 12, 0.7).unwrap();
        for t in [0.0, 0.05] {
            let cfg = OcclusionConfig {
                derivative_threshold: t,
                ..Default::default()
            };
            assert_eq!(occlusion_fraction(&m, &z, &cfg).unwrap(), 0.0);
        }
    }

    #[test]
    fn full_mask_border_is_not_occlusion() {
        let m = Mask::full(8, 8).unwrap();
        let z = NearnessMap::from_fn(8, 8, |x, y| (x * y) as f64).unwrap();
        let cfg = OcclusionConfig {
            derivative_threshold: 0.0,
            ..Default::default()
        };
        assert_eq!(occlusion_fraction(&m, &z, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn receding_surroundings_give_zero() {
        // nearness peaks at the mask center and falls off outward
        let m = square(16, 16, 5, 5, 6);
        let z = NearnessMap::from_fn(16, 16, |x, y| {
            let dx = x as f64 - 7.5;
            let dy = y as f64 - 7.5;
            10.0 - (dx * dx + dy * dy).sqrt()
        })
        .unwrap();
        let cfg = OcclusionConfig {
            derivative_threshold: 0.0,
            ..Default::default()
        };
        assert_eq!(occlusion_fraction(&m, &z, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(OcclusionConfig::default().validate().is_ok());
        for bad in [
            OcclusionConfig {
                derivative_threshold: -0.1,
                ..Default::default()
            },
            OcclusionConfig {
                occlusion_fraction_threshold: 1.0,
                ..Default::default()
            },
            OcclusionConfig {
                probe_distance: 0.5,
                ..Default::default()
            },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
        assert!(Connectivity::try_from(6).is_err());
    }

    #[test]
    fn verdict_invariants() {
        assert!(OcclusionVerdict::new(0, None, OcclusionLabel::Unoccluded).is_err());
        assert!(OcclusionVerdict::new(0, Some(1.5), OcclusionLabel::Occluded).is_err());
        let v = OcclusionVerdict::new(3, Some(0.1), OcclusionLabel::Unoccluded).unwrap();
        assert_eq!(v.v(), 1);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, r#"{"frame":3,"f_occ":0.1,"label":"unoccluded","V":1}"#);
        let back: OcclusionVerdict = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        let bad = r#"{"frame":3,"f_occ":0.1,"label":"occluded","V":1}"#;
        assert!(serde_json::from_str::<OcclusionVerdict>(bad).is_err());
    }

    #[test]
    fn label_frames_branches() {
        let (w, h) = (12, 10);
        let visible = MaskSequence::new(vec![
            square(w, h, 3, 3, 4),
            Mask::empty(w, h).unwrap(),
            Mask::empty(w, h).unwrap(),
        ])
        .unwrap();
        let z = vec![NearnessMap::constant(w, h, 0.1).unwrap(); 3];
        let boxes = [
            AmodalBox::new(0, 3.0, 3.0, 7.0, 7.0, Provenance::Observed).unwrap(),
            AmodalBox::new(1, 5.0, 3.0, 9.0, 7.0, Provenance::Interpolated).unwrap(),
            AmodalBox::new(2, 12.0, 3.0, 16.0, 7.0, Provenance::Extrapolated).unwrap(),
        ];
        let cfg = OcclusionConfig::default();
        let v = label_frames(&visible, &z, Some(&boxes), &cfg).unwrap();
        assert_eq!(v[0].label(), OcclusionLabel::Unoccluded);
        assert_eq!(v[0].v(), 1);
        assert_eq!(v[1].label(), OcclusionLabel::Occluded);
        assert_eq!(v[1].f_occ(), None);
        assert_eq!(v[2].label(), OcclusionLabel::OutOfFrame);
        assert_eq!(v[2].v(), 0);

        let v = label_frames(&visible, &z, None, &cfg).unwrap();
        assert_eq!(v[2].label(), OcclusionLabel::Occluded);
        assert!(label_frames(&visible, &z[..2], None, &cfg).is_err());
        assert!(label_frames(&visible, &z, Some(&boxes[..1]), &cfg).is_err());
    }
}
