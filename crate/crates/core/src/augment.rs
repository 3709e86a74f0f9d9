//! Camera configuration sampling and focal resize of raw images.
//!
//! Random draws come from a counter-based generator: the value for parameter
//! `p` of sample `index` under `seed` is a fixed function of the triple, so
//! any sample can be recomputed on its own in any order.

use std::f64::consts::PI;

use image::{Rgb, RgbImage};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::{rot_x, rot_y, rot_z, Camera, CameraExtrinsics, CameraIntrinsics, CameraRig};
use crate::{Error, Result};

/// Sampling ranges. Angles are in degrees; every range is `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSpec {
    /// Multiplier on both focal lengths.
    pub focal_scale_range: (f64, f64),
    /// Added to the ego-frame x translation (metres).
    pub tx_delta: (f64, f64),
    pub ty_delta: (f64, f64),
    /// Absolute mounting height (metres); replaces the base height.
    pub tz_range: (f64, f64),
    pub rx_range: (f64, f64),
    pub ry_range: (f64, f64),
    /// Added to the base heading.
    pub rz_delta: (f64, f64),
    /// Probability of training on the raw image instead of a rendered view.
    pub raw_vs_nvs_prob: f64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            focal_scale_range: (0.7, 1.4),
            tx_delta: (-0.2, 0.2),
            ty_delta: (-0.2, 0.2),
            tz_range: (1.5, 2.2),
            rx_range: (-2.0, 2.0),
            ry_range: (-2.0, 2.0),
            rz_delta: (-20.0, 20.0),
            raw_vs_nvs_prob: 0.5,
        }
    }
}

impl AugmentSpec {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("focal_scale_range", self.focal_scale_range),
            ("tx_delta", self.tx_delta),
            ("ty_delta", self.ty_delta),
            ("tz_range", self.tz_range),
            ("rx_range", self.rx_range),
            ("ry_range", self.ry_range),
            ("rz_delta", self.rz_delta),
        ];
        for (name, (lo, hi)) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidSpec(format!("{name} = ({lo}, {hi})")));
            }
        }
        if self.focal_scale_range.0 <= 0.0 {
            return Err(Error::InvalidSpec("focal_scale_range must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.raw_vs_nvs_prob) {
            return Err(Error::InvalidSpec(format!("raw_vs_nvs_prob = {}", self.raw_vs_nvs_prob)));
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Parameter ids keying the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Param {
    Focal = 0,
    Tx = 1,
    Ty = 2,
    Tz = 3,
    Rx = 4,
    Ry = 5,
    Rz = 6,
    Branch = 7,
}

/// Uniform `[0, 1)` value for `(seed, index, param)`.
pub fn uniform(seed: u64, index: u64, param: Param) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    // one 16-word block per parameter
    rng.set_word_pos(u128::from(param as u8) * 16);
    rng.random::<f64>()
}

fn draw(seed: u64, index: u64, param: Param, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        return lo;
    }
    lo + (hi - lo) * uniform(seed, index, param)
}

/// The drawn parameters of one sample. Angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraSample {
    pub focal_scale: f64,
    pub dtx: f64,
    pub dty: f64,
    pub tz: f64,
    pub rx: f64,
    pub ry: f64,
    pub drz: f64,
}

pub fn sample_params(spec: &AugmentSpec, seed: u64, index: u64) -> Result<CameraSample> {
    spec.validate()?;
    Ok(CameraSample {
        focal_scale: draw(seed, index, Param::Focal, spec.focal_scale_range),
        dtx: draw(seed, index, Param::Tx, spec.tx_delta),
        dty: draw(seed, index, Param::Ty, spec.ty_delta),
        tz: draw(seed, index, Param::Tz, spec.tz_range),
        rx: draw(seed, index, Param::Rx, spec.rx_range),
        ry: draw(seed, index, Param::Ry, spec.ry_range),
        drz: draw(seed, index, Param::Rz, spec.rz_delta),
    })
}

impl CameraSample {
    /// Applies the sample to a base camera. The rotation perturbation is
    /// `Rz(drz)·Ry(ry)·Rx(rx)` about ego axes, left-multiplied onto `R`.
    pub fn apply(
        &self,
        intr: &CameraIntrinsics,
        extr: &CameraExtrinsics,
    ) -> Result<(CameraIntrinsics, CameraExtrinsics)> {
        let deg = PI / 180.0;
        let delta = rot_z(self.drz * deg) * rot_y(self.ry * deg) * rot_x(self.rx * deg);
        let t = extr.translation();
        let extr =
            CameraExtrinsics::new(delta * extr.rotation(), Vector3::new(t.x + self.dtx, t.y + self.dty, self.tz))?;
        Ok((intr.with_focal_scale(self.focal_scale)?, extr))
    }
}

pub fn sample_camera(
    intr: &CameraIntrinsics,
    extr: &CameraExtrinsics,
    spec: &AugmentSpec,
    seed: u64,
    index: u64,
) -> Result<(CameraIntrinsics, CameraExtrinsics)> {
    sample_params(spec, seed, index)?.apply(intr, extr)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Raw,
    NovelView,
}

pub fn choose_branch(seed: u64, index: u64, spec: &AugmentSpec) -> Branch {
    if uniform(seed, index, Param::Branch) < spec.raw_vs_nvs_prob {
        Branch::Raw
    } else {
        Branch::NovelView
    }
}

/// Perturbs every camera of a rig. Camera `i` of draw `k` uses sample index
/// `k·len + i`.
pub fn sample_rig(rig: &CameraRig, spec: &AugmentSpec, seed: u64, k: u64) -> Result<Vec<(Camera, Branch)>> {
    let n = rig.len() as u64;
    rig.cameras()
        .iter()
        .enumerate()
        .map(|(i, cam)| {
            let index = k * n + i as u64;
            let (intrinsics, extrinsics) = sample_camera(&cam.intrinsics, &cam.extrinsics, spec, seed, index)?;
            let sampled = Camera { name: cam.name.clone(), intrinsics, extrinsics };
            Ok((sampled, choose_branch(seed, index, spec)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResizedImage {
    pub image: RgbImage,
    pub intrinsics: CameraIntrinsics,
    /// False where the output pixel has no source coverage (filled black).
    pub coverage: Vec<bool>,
}

/// Zooms an image by `scale` about its principal point on a fixed canvas.
///
/// Output pixel `x` samples the source at `c + (x - c)/scale` bilinearly, so
/// the focal lengths of the result are `scale·f` with the principal point kept.
pub fn focal_resize(image: &RgbImage, intr: &CameraIntrinsics, scale: f64) -> Result<ResizedImage> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::NonPositiveScale(scale));
    }
    let (w, h) = image.dimensions();
    if (w, h) != (intr.width(), intr.height()) {
        return Err(Error::ShapeMismatch(format!("image {w}x{h}, intrinsics {}x{}", intr.width(), intr.height())));
    }
    let intrinsics = intr.with_focal_scale(scale)?;
    if scale == 1.0 {
        return Ok(ResizedImage { image: image.clone(), intrinsics, coverage: vec![true; (w * h) as usize] });
    }
    let (cu, cv) = (intr.cu(), intr.cv());
    let (wmax, hmax) = (f64::from(w - 1), f64::from(h - 1));
    let mut coverage = vec![false; (w * h) as usize];
    let mut out = RgbImage::new(w, h);
    for y in 0..h {
        let sy = cv + (f64::from(y) - cv) / scale;
        for x in 0..w {
            let sx = cu + (f64::from(x) - cu) / scale;
            if !(0.0..=wmax).contains(&sx) || !(0.0..=hmax).contains(&sy) {
                continue;
            }
            coverage[(y * w + x) as usize] = true;
            let (x0, y0) = (sx.floor() as u32, sy.floor() as u32);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (fx, fy) = (sx - f64::from(x0), sy - f64::from(y0));
            let px = |xx, yy| image.get_pixel(xx, yy).0.map(f64::from);
            let (a, b, c, d) = (px(x0, y0), px(x1, y0), px(x0, y1), px(x1, y1));
            let mut rgb = [0u8; 3];
            for ch in 0..3 {
                let top = a[ch] + (b[ch] - a[ch]) * fx;
                let bottom = c[ch] + (d[ch] - c[ch]) * fx;
                rgb[ch] = (top + (bottom - top) * fy).round().clamp(0.0, 255.0) as u8;
            }
            out.put_pixel(x, y, Rgb(rgb));
        }
    }
    Ok(ResizedImage { image: out, intrinsics, coverage })
}
