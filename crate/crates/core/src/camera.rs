//! Pinhole cameras, camera-to-ego poses and multi-camera rigs.
//!
//! Angles are radians everywhere except the preset table and the rig JSON
//! helpers, which take degrees.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance used when validating rotation matrices.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Describes the frames used by every rig in this crate. Written into exported rig JSON.
pub const EGO_FRAME_NOTE: &str = "camera frame: x right, y down, z forward; \
ego frame: x forward, y left, z up, origin at the rear axle centre projected to the ground; \
R maps camera axes to ego axes (p_ego = R p_cam + t); preset R = Rz(yaw) * B with \
B = [[0,0,1],[-1,0,0],[0,-1,0]]";

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    fu: f64,
    fv: f64,
    cu: f64,
    cv: f64,
    width: u32,
    height: u32,
}

impl CameraIntrinsics {
    pub fn new(fu: f64, fv: f64, cu: f64, cv: f64, width: u32, height: u32) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidIntrinsics(msg));
        if width == 0 || height == 0 {
            return bad(format!("image size {width}x{height} must be at least 1x1"));
        }
        if !(fu.is_finite() && fu > 0.0 && fv.is_finite() && fv > 0.0) {
            return bad(format!("focal lengths ({fu}, {fv}) must be positive"));
        }
        if !(cu > 0.0 && cu < f64::from(width)) || !(cv > 0.0 && cv < f64::from(height)) {
            return bad(format!("principal point ({cu}, {cv}) outside the open image {width}x{height}"));
        }
        Ok(Self { fu, fv, cu, cv, width, height })
    }

    /// Intrinsics with the principal point at the image centre.
    pub fn centered(fu: f64, fv: f64, width: u32, height: u32) -> Result<Self> {
        Self::new(fu, fv, f64::from(width) / 2.0, f64::from(height) / 2.0, width, height)
    }

    pub fn fu(&self) -> f64 {
        self.fu
    }
    pub fn fv(&self) -> f64 {
        self.fv
    }
    pub fn cu(&self) -> f64 {
        self.cu
    }
    pub fn cv(&self) -> f64 {
        self.cv
    }
    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }

    /// Single focal length: `fu` for square pixels, otherwise the geometric mean.
    pub fn focal(&self) -> f64 {
        if self.fu == self.fv {
            self.fu
        } else {
            (self.fu * self.fv).sqrt()
        }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fu, 0.0, self.cu, 0.0, self.fv, self.cv, 0.0, 0.0, 1.0)
    }

    /// Normalized camera coordinates `((u - cu)/fu, (v - cv)/fv)`.
    #[inline]
    pub fn normalize(&self, u: f64, v: f64) -> (f64, f64) {
        ((u - self.cu) / self.fu, (v - self.cv) / self.fv)
    }

    /// Rescales to a working resolution of `out_w` columns.
    ///
    /// Focal lengths and principal point scale by `out_w / width` on both
    /// axes; `out_h` only sets the canvas height.
    pub fn rescaled(&self, out_w: u32, out_h: u32) -> Result<Self> {
        let s = f64::from(out_w) / f64::from(self.width);
        Self::new(self.fu * s, self.fv * s, self.cu * s, self.cv * s, out_w, out_h)
    }

    /// Same canvas, focal lengths multiplied by `scale`.
    pub fn with_focal_scale(&self, scale: f64) -> Result<Self> {
        Self::new(self.fu * scale, self.fv * scale, self.cu, self.cv, self.width, self.height)
    }
}

/// Horizontal field of view in degrees, `2·atan(cu/fu)`.
pub fn horizontal_fov(intr: &CameraIntrinsics) -> f64 {
    2.0 * (intr.cu / intr.fu).atan().to_degrees()
}

/// Vertical field of view in degrees, `2·atan((h - cv)/fv)`.
pub fn vertical_fov(intr: &CameraIntrinsics) -> f64 {
    2.0 * ((f64::from(intr.height) - intr.cv) / intr.fv).atan().to_degrees()
}

/// Rigid camera-to-ego transform: `p_ego = R p_cam + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraExtrinsics {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

/// Rotation taking the axes of a forward-looking camera (x right, y down,
/// z forward) to ego axes (x forward, y left, z up).
pub fn forward_camera_basis() -> Matrix3<f64> {
    Matrix3::new(0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0)
}

pub fn rot_x(angle: f64) -> Matrix3<f64> {
    Rotation3::from_axis_angle(&Vector3::x_axis(), angle).into_inner()
}

pub fn rot_y(angle: f64) -> Matrix3<f64> {
    Rotation3::from_axis_angle(&Vector3::y_axis(), angle).into_inner()
}

pub fn rot_z(angle: f64) -> Matrix3<f64> {
    Rotation3::from_axis_angle(&Vector3::z_axis(), angle).into_inner()
}

impl CameraExtrinsics {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !rotation.iter().chain(translation.iter()).all(|x| x.is_finite()) {
            return Err(Error::InvalidExtrinsics("non-finite entries".into()));
        }
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if ortho > ROTATION_TOLERANCE {
            return Err(Error::InvalidExtrinsics(format!("R^T R deviates from identity by {ortho:e}")));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(Error::InvalidExtrinsics(format!("det(R) = {det}")));
        }
        Ok(Self { rotation, translation })
    }

    /// Camera frame coincides with the ego frame.
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    /// Level camera (zero pitch and roll) at `translation`, looking along ego
    /// heading `yaw` (radians, counter-clockwise about ego z).
    pub fn from_yaw(yaw: f64, translation: Vector3<f64>) -> Self {
        Self { rotation: rot_z(yaw) * forward_camera_basis(), translation }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Camera height above the ego ground plane.
    pub fn height(&self) -> f64 {
        self.translation.z
    }

    /// Heading of the optical axis projected onto the ego xy-plane.
    pub fn yaw(&self) -> f64 {
        let axis = self.rotation.column(2);
        axis.y.atan2(axis.x)
    }

    #[inline]
    pub fn ego_to_camera(&self, p_ego: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.tr_mul(&(p_ego - self.translation))
    }

    #[inline]
    pub fn camera_to_ego(&self, p_cam: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p_cam + self.translation
    }
}

/// Pixel position and camera-frame depth of a projected point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelDepth {
    pub u: f64,
    pub v: f64,
    pub z: f64,
}

pub fn project(intr: &CameraIntrinsics, extr: &CameraExtrinsics, p_ego: &Vector3<f64>) -> Result<PixelDepth> {
    let p = extr.ego_to_camera(p_ego);
    if !(p.z > 0.0) {
        return Err(Error::BehindCamera(p.z));
    }
    Ok(PixelDepth { u: intr.fu * (p.x / p.z) + intr.cu, v: intr.fv * (p.y / p.z) + intr.cv, z: p.z })
}

pub fn unproject(intr: &CameraIntrinsics, extr: &CameraExtrinsics, u: f64, v: f64, z: f64) -> Result<Vector3<f64>> {
    if !(z > 0.0) {
        return Err(Error::NonPositiveDepth(z));
    }
    let (x, y) = intr.normalize(u, v);
    Ok(extr.camera_to_ego(&Vector3::new(x * z, y * z, z)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub name: String,
    pub intrinsics: CameraIntrinsics,
    pub extrinsics: CameraExtrinsics,
}

impl Camera {
    pub fn project(&self, p_ego: &Vector3<f64>) -> Result<PixelDepth> {
        project(&self.intrinsics, &self.extrinsics, p_ego)
    }

    pub fn unproject(&self, u: f64, v: f64, z: f64) -> Result<Vector3<f64>> {
        unproject(&self.intrinsics, &self.extrinsics, u, v, z)
    }
}

/// An ordered, non-empty set of uniquely named cameras.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraRig {
    cameras: Vec<Camera>,
    pub ego_frame_note: String,
}

impl CameraRig {
    pub fn new(cameras: Vec<Camera>) -> Result<Self> {
        if cameras.is_empty() {
            return Err(Error::InvalidRig("rig has no cameras".into()));
        }
        let mut seen = HashSet::new();
        for cam in &cameras {
            if !seen.insert(cam.name.as_str()) {
                return Err(Error::InvalidRig(format!("duplicate camera name {:?}", cam.name)));
            }
        }
        Ok(Self { cameras, ego_frame_note: EGO_FRAME_NOTE.to_string() })
    }

    pub fn cameras(&self) -> &[Camera] {
        &self.cameras
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    pub fn camera(&self, name: &str) -> Result<&Camera> {
        self.cameras.iter().find(|c| c.name == name).ok_or_else(|| Error::UnknownCamera(name.to_string()))
    }

    /// Copy of the rig with every camera's intrinsics rescaled by `scale`.
    pub fn rescaled(&self, scale: f64) -> Result<Self> {
        let cameras = self
            .cameras
            .iter()
            .map(|c| {
                let w = (f64::from(c.intrinsics.width) * scale).round().max(1.0) as u32;
                let h = (f64::from(c.intrinsics.height) * scale).round().max(1.0) as u32;
                Ok(Camera { intrinsics: c.intrinsics.rescaled(w, h)?, ..c.clone() })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(cameras)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: RigFile = serde_json::from_str(s)?;
        file.into_rig()
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&RigFile::from_rig(self))?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()? + "\n")?;
        Ok(())
    }

    /// Resolves a preset name or a path to a rig JSON file.
    pub fn from_preset_or_file(spec: &str) -> Result<Self> {
        match spec.parse::<Preset>() {
            Ok(p) => Ok(preset_rig(p)),
            Err(e) if !Path::new(spec).exists() => Err(e),
            Err(_) => Self::load(spec),
        }
    }
}

/// On-disk rig layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ego_frame_note: Option<String>,
    pub cameras: Vec<CameraEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CameraEntry {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub fu: f64,
    pub fv: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv: Option<f64>,
    #[serde(rename = "R")]
    pub rotation: [f64; 9],
    pub t: [f64; 3],
}

impl CameraEntry {
    pub fn from_camera(cam: &Camera) -> Self {
        let r = cam.extrinsics.rotation();
        let i = &cam.intrinsics;
        Self {
            name: cam.name.clone(),
            width: i.width,
            height: i.height,
            fu: i.fu,
            fv: i.fv,
            cu: Some(i.cu),
            cv: Some(i.cv),
            rotation: [
                r[(0, 0)],
                r[(0, 1)],
                r[(0, 2)],
                r[(1, 0)],
                r[(1, 1)],
                r[(1, 2)],
                r[(2, 0)],
                r[(2, 1)],
                r[(2, 2)],
            ],
            t: [cam.extrinsics.translation.x, cam.extrinsics.translation.y, cam.extrinsics.translation.z],
        }
    }

    pub fn to_camera(&self) -> Result<Camera> {
        let cu = self.cu.unwrap_or(f64::from(self.width) / 2.0);
        let cv = self.cv.unwrap_or(f64::from(self.height) / 2.0);
        let intrinsics = CameraIntrinsics::new(self.fu, self.fv, cu, cv, self.width, self.height)?;
        let extrinsics =
            CameraExtrinsics::new(Matrix3::from_row_slice(&self.rotation), Vector3::from_column_slice(&self.t))?;
        Ok(Camera { name: self.name.clone(), intrinsics, extrinsics })
    }
}

impl RigFile {
    pub fn from_rig(rig: &CameraRig) -> Self {
        Self {
            ego_frame_note: Some(rig.ego_frame_note.clone()),
            cameras: rig.cameras.iter().map(CameraEntry::from_camera).collect(),
        }
    }

    pub fn into_rig(self) -> Result<CameraRig> {
        let cams = self.cameras.iter().map(CameraEntry::to_camera).collect::<Result<Vec<_>>>()?;
        let mut rig = CameraRig::new(cams)?;
        if let Some(note) = self.ego_frame_note {
            rig.ego_frame_note = note;
        }
        Ok(rig)
    }
}

/// Built-in rigs for the three public driving datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    NuScenes,
    LyftFleet1,
    LyftFleet2,
    Waymo,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::NuScenes, Preset::LyftFleet1, Preset::LyftFleet2, Preset::Waymo];

    pub fn name(self) -> &'static str {
        match self {
            Preset::NuScenes => "nuscenes",
            Preset::LyftFleet1 => "lyft_fleet1",
            Preset::LyftFleet2 => "lyft_fleet2",
            Preset::Waymo => "waymo",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "nuscenes" => Ok(Preset::NuScenes),
            "lyft_fleet1" | "lyft1" => Ok(Preset::LyftFleet1),
            "lyft_fleet2" | "lyft2" => Ok(Preset::LyftFleet2),
            "waymo" => Ok(Preset::Waymo),
            _ => Err(Error::UnknownPreset(s.to_string())),
        }
    }
}

struct PresetCamera {
    name: &'static str,
    size: (u32, u32),
    focal: f64,
    /// Tabulated horizontal / vertical field of view in degrees.
    fov: (f64, f64),
    t: [f64; 3],
    yaw_deg: f64,
}

/// Half-extent of the image (in pixels) on one side of the principal point.
///
/// The image centre is used unless it contradicts the tabulated field of view
/// by more than the table's rounding, in which case the extent is recovered
/// from `fov = 2·atan(extent / f)`.
fn principal_extent(half_size: f64, focal: f64, tab_fov_deg: f64) -> f64 {
    let centered = 2.0 * (half_size / focal).atan().to_degrees();
    if (centered - tab_fov_deg).abs() <= 0.5 {
        half_size
    } else {
        focal * (tab_fov_deg.to_radians() / 2.0).tan()
    }
}

fn preset_table(preset: Preset) -> Vec<PresetCamera> {
    let cam = |name, size, focal, fov, t, yaw_deg| PresetCamera { name, size, focal, fov, t, yaw_deg };
    match preset {
        Preset::NuScenes => vec![
            cam("front", (1600, 900), 1250.0, (65.0, 40.0), [1.7, 0.0, 1.5], 0.0),
            cam("front_left", (1600, 900), 1250.0, (65.0, 40.0), [1.55, 0.5, 1.5], 55.0),
            cam("front_right", (1600, 900), 1250.0, (65.0, 40.0), [1.55, -0.5, 1.5], -55.0),
            cam("back", (1600, 900), 800.0, (90.0, 60.0), [0.0, 0.0, 1.5], 180.0),
            cam("back_left", (1600, 900), 1250.0, (65.0, 40.0), [1.0, 0.5, 1.55], 110.0),
            cam("back_right", (1600, 900), 1250.0, (65.0, 40.0), [1.0, -0.5, 1.55], -110.0),
        ],
        Preset::LyftFleet1 => vec![
            cam("front", (1224, 1024), 880.0, (70.0, 60.0), [1.5, 0.0, 1.7], 0.0),
            cam("front_left", (1224, 1024), 880.0, (70.0, 60.0), [1.3, 0.3, 1.7], 60.0),
            cam("front_right", (1224, 1024), 880.0, (70.0, 60.0), [1.3, -0.3, 1.7], -60.0),
            cam("back", (1224, 1024), 880.0, (70.0, 60.0), [0.8, 0.0, 1.65], 180.0),
            cam("back_left", (1224, 1024), 880.0, (70.0, 60.0), [1.0, 0.3, 1.65], 120.0),
            cam("back_right", (1224, 1024), 880.0, (70.0, 60.0), [1.0, -0.3, 1.65], -120.0),
        ],
        Preset::LyftFleet2 => vec![
            cam("front", (1920, 1080), 1100.0, (80.0, 50.0), [1.5, 0.0, 1.65], 0.0),
            cam("front_left", (1920, 1080), 1100.0, (80.0, 50.0), [1.3, 0.3, 1.65], 60.0),
            cam("front_right", (1920, 1080), 1100.0, (80.0, 50.0), [1.3, -0.3, 1.65], -60.0),
            cam("back", (1920, 1080), 1100.0, (80.0, 50.0), [0.8, 0.0, 1.65], 180.0),
            cam("back_left", (1920, 1080), 1100.0, (80.0, 50.0), [1.0, 0.3, 1.65], 120.0),
            cam("back_right", (1920, 1080), 1100.0, (80.0, 50.0), [1.0, -0.3, 1.65], -120.0),
        ],
        Preset::Waymo => vec![
            cam("front", (1920, 1280), 2050.0, (50.0, 35.0), [1.55, 0.0, 2.1], 0.0),
            cam("front_left", (1920, 1280), 2050.0, (50.0, 35.0), [1.5, 0.1, 2.1], 45.0),
            cam("front_right", (1920, 1280), 2050.0, (50.0, 35.0), [1.5, -0.1, 2.1], -45.0),
            cam("side_left", (1920, 886), 2050.0, (50.0, 35.0), [1.4, 0.1, 2.1], 90.0),
            cam("side_right", (1920, 886), 2050.0, (50.0, 35.0), [1.4, -0.1, 2.1], -90.0),
        ],
    }
}

/// Builds one of the dataset rigs. Pitch and roll are zero for every camera.
pub fn preset_rig(preset: Preset) -> CameraRig {
    let cameras = preset_table(preset)
        .into_iter()
        .map(|c| {
            let (w, h) = (f64::from(c.size.0), f64::from(c.size.1));
            let cu = principal_extent(w / 2.0, c.focal, c.fov.0);
            let cv = h - principal_extent(h / 2.0, c.focal, c.fov.1);
            let intrinsics = CameraIntrinsics::new(c.focal, c.focal, cu, cv, c.size.0, c.size.1)
                .expect("preset intrinsics are valid");
            let extrinsics = CameraExtrinsics::from_yaw(c.yaw_deg.to_radians(), Vector3::from(c.t));
            Camera { name: c.name.to_string(), intrinsics, extrinsics }
        })
        .collect();
    CameraRig::new(cameras).expect("preset rigs are valid")
}

pub fn preset_rig_by_name(name: &str) -> Result<CameraRig> {
    Ok(preset_rig(name.parse()?))
}
