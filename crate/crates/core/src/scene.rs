//! Ego-centric Gaussians built directly from coloured points.
//!
//! Every Gaussian is isotropic (`Σ = r̂·I₃`), unrotated and fully opaque, so a
//! scene only stores centres, radii, colours and a foreground flag.

use image::RgbImage;
use nalgebra::Vector3;
use rayon::prelude::*;

use crate::camera::{CameraExtrinsics, CameraIntrinsics};
use crate::{Error, Result};

pub const FOREGROUND_RADIUS: f64 = 0.0025;
/// Background radius at ground level (`z = 0`).
pub const BACKGROUND_RADIUS_GROUND: f64 = 0.02;
/// Background radius at and above [`BACKGROUND_TAPER_HEIGHT`].
pub const BACKGROUND_RADIUS_TOP: f64 = 0.001;
pub const BACKGROUND_TAPER_HEIGHT: f64 = 10.0;

/// Depth samples outside this open interval (metres) are skipped.
pub const VALID_DEPTH_RANGE: (f64, f64) = (0.1, 200.0);

/// Gaussian radius for a point at ego height `z`.
///
/// Foreground points use a fixed radius. Background radii shrink linearly
/// from 0.02 m on the ground to 0.001 m at 10 m and are clamped outside.
pub fn radius_schedule(z_ego: f64, is_foreground: bool) -> f64 {
    if is_foreground {
        return FOREGROUND_RADIUS;
    }
    let t = (z_ego / BACKGROUND_TAPER_HEIGHT).clamp(0.0, 1.0);
    BACKGROUND_RADIUS_GROUND * (1.0 - t) + BACKGROUND_RADIUS_TOP * t
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColoredPoint {
    pub position: Vector3<f64>,
    pub color: [f64; 3],
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GaussianScene {
    pub centers: Vec<Vector3<f64>>,
    pub radii: Vec<f64>,
    pub colors: Vec<[f64; 3]>,
    pub foreground: Vec<bool>,
}

/// One calibrated RGB-D view. `depth` is camera-frame z per pixel, row-major.
#[derive(Debug, Clone, Copy)]
pub struct RgbdFrame<'a> {
    pub rgb: &'a RgbImage,
    pub depth: &'a [f64],
    pub intrinsics: &'a CameraIntrinsics,
    pub extrinsics: &'a CameraExtrinsics,
}

fn valid_depth(z: f64) -> bool {
    z > VALID_DEPTH_RANGE.0 && z < VALID_DEPTH_RANGE.1
}

impl GaussianScene {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Checks the per-Gaussian invariants and that all columns have equal length.
    pub fn validate(&self) -> Result<()> {
        let n = self.centers.len();
        if self.radii.len() != n || self.colors.len() != n || self.foreground.len() != n {
            return Err(Error::ShapeMismatch("scene columns differ in length".into()));
        }
        if let Some(i) = self.radii.iter().position(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::OutOfRange(format!("Gaussian {i} has radius {}", self.radii[i])));
        }
        if let Some(i) = self.colors.iter().position(|c| !c.iter().all(|v| (0.0..=1.0).contains(v))) {
            return Err(Error::ColorOutOfRange(i));
        }
        Ok(())
    }

    pub fn push(&mut self, center: Vector3<f64>, radius: f64, color: [f64; 3], is_foreground: bool) {
        self.centers.push(center);
        self.radii.push(radius);
        self.colors.push(color);
        self.foreground.push(is_foreground);
    }

    /// One background Gaussian per valid depth pixel of every frame.
    pub fn from_rgbd(frames: &[RgbdFrame<'_>]) -> Result<Self> {
        let mut scene = Self::new();
        for (k, f) in frames.iter().enumerate() {
            let (w, h) = (f.intrinsics.width() as usize, f.intrinsics.height() as usize);
            if f.rgb.dimensions() != (w as u32, h as u32) || f.depth.len() != w * h {
                return Err(Error::ShapeMismatch(format!(
                    "frame {k}: rgb {:?}, depth {} values, camera {w}x{h}",
                    f.rgb.dimensions(),
                    f.depth.len()
                )));
            }
            let rows: Vec<Vec<(Vector3<f64>, [f64; 3])>> = (0..h)
                .into_par_iter()
                .map(|row| {
                    (0..w)
                        .filter_map(|col| {
                            let z = f.depth[row * w + col];
                            if !valid_depth(z) {
                                return None;
                            }
                            let (x, y) = f.intrinsics.normalize(col as f64, row as f64);
                            let p = f.extrinsics.camera_to_ego(&Vector3::new(x * z, y * z, z));
                            let px = f.rgb.get_pixel(col as u32, row as u32).0;
                            Some((p, px.map(|c| f64::from(c) / 255.0)))
                        })
                        .collect()
                })
                .collect();
            for (p, color) in rows.into_iter().flatten() {
                scene.push(p, radius_schedule(p.z, false), color, false);
            }
        }
        if scene.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(scene)
    }

    /// Adds coloured points with radii from [`radius_schedule`].
    pub fn append_points(mut self, points: &[ColoredPoint], is_foreground: bool) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.color.iter().all(|v| (0.0..=1.0).contains(v))) {
            return Err(Error::ColorOutOfRange(i));
        }
        for p in points {
            self.push(p.position, radius_schedule(p.position.z, is_foreground), p.color, is_foreground);
        }
        Ok(self)
    }

    pub fn extend(&mut self, other: &GaussianScene) {
        self.centers.extend_from_slice(&other.centers);
        self.radii.extend_from_slice(&other.radii);
        self.colors.extend_from_slice(&other.colors);
        self.foreground.extend_from_slice(&other.foreground);
    }
}
