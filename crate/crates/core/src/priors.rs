//! Per-pixel camera priors at feature resolution.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{CameraExtrinsics, CameraIntrinsics};
use crate::ground::{self, DEFAULT_GROUND_SAMPLES, DEFAULT_MAX_DEPTH};
use crate::{Error, FeatureTensor, Result};

pub const FOCAL_NORM: f64 = 500.0;
pub const DEPTH_NORM: f64 = 25.0;
pub const GRADIENT_NORM: f64 = 2.0;

/// Names of the nine raw prior channels in stack order.
pub const PRIOR_CHANNELS: [&str; 9] = ["m_if", "m_gd", "m_gg", "d_x", "d_y", "d_z", "m_x", "m_y", "m_z"];

/// What channel 0 of the raw prior stack carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FocalChannelMode {
    /// The inverse-square focal map `1/f²` itself.
    #[default]
    Eq2,
    /// The working focal length divided by [`FOCAL_NORM`].
    Normalized500,
}

impl std::str::FromStr for FocalChannelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eq2" => Ok(Self::Eq2),
            "normalized500" => Ok(Self::Normalized500),
            _ => Err(Error::InvalidSpec(format!("unknown focal channel mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorConfig {
    pub max_depth: f64,
    pub focal_channel_mode: FocalChannelMode,
    /// Normalize Plücker directions to unit length.
    pub unit_directions: bool,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self { max_depth: DEFAULT_MAX_DEPTH, focal_channel_mode: FocalChannelMode::Eq2, unit_directions: false }
    }
}

/// Plücker line `(d, m)` in the ego frame; `m = t × d` for a ray through `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PluckerRay {
    pub d: Vector3<f64>,
    pub m: Vector3<f64>,
}

impl PluckerRay {
    /// Ray through pixel `(u, v)`: `d = R K⁻¹ [u v 1]ᵀ`, `m = t × d`.
    #[inline]
    pub fn through_pixel(intr: &CameraIntrinsics, extr: &CameraExtrinsics, u: f64, v: f64) -> Self {
        let (x, y) = intr.normalize(u, v);
        let d = extr.rotation() * Vector3::new(x, y, 1.0);
        Self { d, m: extr.translation().cross(&d) }
    }

    pub fn normalized(&self) -> Self {
        let n = self.d.norm();
        Self { d: self.d / n, m: self.m / n }
    }

    /// Distance-like residual `|p × d − m|`, zero for points on the line.
    pub fn point_residual(&self, p: &Vector3<f64>) -> f64 {
        (p.cross(&self.d) - self.m).norm()
    }
}

/// Constant `1/f²` map with `f` the working-resolution focal length.
pub fn inverse_focal_map(intr: &CameraIntrinsics, out_w: usize, out_h: usize) -> Result<FeatureTensor> {
    let f = intr.rescaled(out_w as u32, out_h as u32)?.focal();
    Ok(FeatureTensor::filled(1, out_h, out_w, 1.0 / (f * f)))
}

/// Six-channel raymap `[d_x, d_y, d_z, m_x, m_y, m_z]` on the output grid.
pub fn plucker_raymap(
    intr: &CameraIntrinsics,
    extr: &CameraExtrinsics,
    out_w: usize,
    out_h: usize,
    unit_directions: bool,
) -> Result<FeatureTensor> {
    let scaled = intr.rescaled(out_w as u32, out_h as u32)?;
    let n = out_w * out_h;
    let mut data = vec![0.0; 6 * n];
    let (dirs, moments) = data.split_at_mut(3 * n);
    let (dx, rest) = dirs.split_at_mut(n);
    let (dy, dz) = rest.split_at_mut(n);
    let (mx, rest) = moments.split_at_mut(n);
    let (my, mz) = rest.split_at_mut(n);
    dx.par_chunks_mut(out_w)
        .zip(dy.par_chunks_mut(out_w))
        .zip(dz.par_chunks_mut(out_w))
        .zip(mx.par_chunks_mut(out_w))
        .zip(my.par_chunks_mut(out_w))
        .zip(mz.par_chunks_mut(out_w))
        .enumerate()
        .for_each(|(row, (((((dx, dy), dz), mx), my), mz))| {
            for col in 0..out_w {
                let mut ray = PluckerRay::through_pixel(&scaled, extr, col as f64, row as f64);
                if unit_directions {
                    ray = ray.normalized();
                }
                dx[col] = ray.d.x;
                dy[col] = ray.d.y;
                dz[col] = ray.d.z;
                mx[col] = ray.m.x;
                my[col] = ray.m.y;
                mz[col] = ray.m.z;
            }
        });
    FeatureTensor::from_vec(6, out_h, out_w, data)
}

/// The complete set of priors for one camera at one working resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorMapSet {
    /// Working-resolution focal length used for `m_if`.
    pub focal: f64,
    /// `1/f²`, unnormalized.
    pub m_if: FeatureTensor,
    /// Ground depth divided by [`DEPTH_NORM`].
    pub m_gd: FeatureTensor,
    /// Ground gradient divided by [`GRADIENT_NORM`].
    pub m_gg: FeatureTensor,
    pub m_pr: FeatureTensor,
    /// Ground depth and gradient both valid.
    pub valid: Vec<bool>,
    pub focal_channel_mode: FocalChannelMode,
}

impl PriorMapSet {
    pub fn width(&self) -> usize {
        self.m_if.width()
    }

    pub fn height(&self) -> usize {
        self.m_if.height()
    }

    /// Channel 0 of the raw stack according to `focal_channel_mode`.
    pub fn focal_channel(&self) -> FeatureTensor {
        match self.focal_channel_mode {
            FocalChannelMode::Eq2 => self.m_if.clone(),
            FocalChannelMode::Normalized500 => {
                FeatureTensor::filled(1, self.height(), self.width(), self.focal / FOCAL_NORM)
            }
        }
    }

    /// Nine channels in [`PRIOR_CHANNELS`] order.
    pub fn raw_stack(&self) -> FeatureTensor {
        FeatureTensor::concat(&[&self.focal_channel(), &self.m_gd, &self.m_gg, &self.m_pr])
            .expect("prior maps share one shape")
    }
}

pub fn build_prior_set(
    intr: &CameraIntrinsics,
    extr: &CameraExtrinsics,
    out_w: usize,
    out_h: usize,
    config: &PriorConfig,
) -> Result<PriorMapSet> {
    if out_h < 2 {
        return Err(Error::TooFewRows(out_h));
    }
    let scaled = intr.rescaled(out_w as u32, out_h as u32)?;
    let plane = ground::fit_ground_plane(extr, DEFAULT_GROUND_SAMPLES)?;
    let gd = ground::ground_depth_map(intr, &plane, out_w, out_h, config.max_depth)?;
    let gg = ground::ground_gradient_map(&gd)?;
    let valid = gd.valid.iter().zip(&gg.valid).map(|(&a, &b)| a && b).collect();
    let m_gd = FeatureTensor::from_vec(1, out_h, out_w, gd.values.iter().map(|v| v / DEPTH_NORM).collect())?;
    let m_gg = FeatureTensor::from_vec(1, out_h, out_w, gg.values.iter().map(|v| v / GRADIENT_NORM).collect())?;
    Ok(PriorMapSet {
        focal: scaled.focal(),
        m_if: inverse_focal_map(intr, out_w, out_h)?,
        m_gd,
        m_gg,
        m_pr: plucker_raymap(intr, extr, out_w, out_h, config.unit_directions)?,
        valid,
        focal_channel_mode: config.focal_channel_mode,
    })
}
