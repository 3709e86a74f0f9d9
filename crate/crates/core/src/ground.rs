//! Flat-ground priors: plane fitting, ground depth and ground gradient maps.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;

use crate::camera::{CameraExtrinsics, CameraIntrinsics};
use crate::{Error, Result};

/// Depth assigned to pixels whose ray never meets the ground within range.
pub const DEFAULT_MAX_DEPTH: f64 = 100.0;

/// Number of ego ground points used by [`fit_ground_plane`] in the prior pipeline.
pub const DEFAULT_GROUND_SAMPLES: usize = 16;

/// `A x + B y + C z + D = 0` in camera coordinates with `(A, B, C)` of unit
/// length, oriented so that `D <= 0`: the camera centre lies on the negative
/// side and rays hitting the ground have `(A, B, C)·dir > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundPlane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl GroundPlane {
    /// Normalizes `(a, b, c)` and orients the plane as documented on the type.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let n = (a * a + b * b + c * c).sqrt();
        if !(n > 0.0) || !d.is_finite() {
            return Err(Error::DegenerateSamples);
        }
        let s = if d > 0.0 { -1.0 / n } else { 1.0 / n };
        Ok(Self { a: a * s, b: b * s, c: c * s, d: d * s })
    }

    pub fn normal(&self) -> Vector3<f64> {
        Vector3::new(self.a, self.b, self.c)
    }

    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        self.a * p.x + self.b * p.y + self.c * p.z + self.d
    }
}

/// Total least-squares plane through `points`.
pub fn fit_plane(points: &[Vector3<f64>]) -> Result<GroundPlane> {
    if points.len() < 3 {
        return Err(Error::DegenerateSamples);
    }
    let n = points.len() as f64;
    let centroid = points.iter().sum::<Vector3<f64>>() / n;
    let scatter = points.iter().fold(Matrix3::zeros(), |acc, p| {
        let q = p - centroid;
        acc + q * q.transpose()
    });
    let eig = SymmetricEigen::new(scatter);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let (smallest, middle, largest) = (order[0], eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
    // Collinear points leave two vanishing directions.
    if !(largest > 0.0) || middle <= largest * 1e-12 {
        return Err(Error::DegenerateSamples);
    }
    let normal = eig.eigenvectors.column(smallest).into_owned();
    GroundPlane::new(normal.x, normal.y, normal.z, -normal.dot(&centroid))
}

/// Deterministic ego ground samples on a lattice spanning x ∈ [2, 50] m and
/// y ∈ [−10, 10] m. The first `count` points of a `k×k` grid are returned
/// with `k = max(2, ceil(sqrt(count)))`, so any three are non-collinear.
pub fn ground_samples(count: usize) -> Vec<Vector3<f64>> {
    let k = ((count as f64).sqrt().ceil() as usize).max(2);
    let step = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (k - 1) as f64;
    (0..k)
        .flat_map(|i| (0..k).map(move |j| Vector3::new(step(2.0, 50.0, i), step(-10.0, 10.0, j), 0.0)))
        .take(count)
        .collect()
}

/// Fits the ego ground plane `z = 0` expressed in the camera frame.
pub fn fit_ground_plane(extr: &CameraExtrinsics, sample_count: usize) -> Result<GroundPlane> {
    if sample_count < 3 {
        return Err(Error::DegenerateSamples);
    }
    let pts: Vec<_> = ground_samples(sample_count).iter().map(|p| extr.ego_to_camera(p)).collect();
    fit_plane(&pts)
}

/// Ground depth along the ray of image point `(u, v)`:
/// `z = -D / (A X + B Y + C)` with `X = (u - cu)/fu`, `Y = (v - cv)/fv`.
/// `None` when the ray does not descend onto the plane.
#[inline]
pub fn ground_depth_at(intr: &CameraIntrinsics, plane: &GroundPlane, u: f64, v: f64) -> Option<f64> {
    let (x, y) = intr.normalize(u, v);
    let denom = plane.a * x + plane.b * y + plane.c;
    if !(denom > 0.0) {
        return None;
    }
    let z = -plane.d / denom;
    (z > 0.0 && z.is_finite()).then_some(z)
}

/// Horizon-free depth for a level camera: `H / tan(fov/2)`.
pub fn initial_ground_depth(cam_height: f64, vertical_fov_deg: f64) -> Result<f64> {
    if !(vertical_fov_deg > 0.0 && vertical_fov_deg < 180.0) {
        return Err(Error::InvalidFov(vertical_fov_deg));
    }
    if !(cam_height > 0.0) {
        return Err(Error::InvalidHeight(cam_height));
    }
    Ok(cam_height / (vertical_fov_deg.to_radians() / 2.0).tan())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

/// Evaluates the ground depth for every pixel of an `out_w × out_h` canvas.
///
/// `intr` is rescaled to the output width first. Pixels above the horizon or
/// farther than `max_depth` are invalid and hold `max_depth`.
pub fn ground_depth_map(
    intr: &CameraIntrinsics,
    plane: &GroundPlane,
    out_w: usize,
    out_h: usize,
    max_depth: f64,
) -> Result<DepthMap> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::ShapeMismatch(format!("output size {out_w}x{out_h}")));
    }
    if !(max_depth > 0.0) {
        return Err(Error::OutOfRange(format!("max_depth {max_depth} must be positive")));
    }
    let scaled = intr.rescaled(out_w as u32, out_h as u32)?;
    let mut values = vec![max_depth; out_w * out_h];
    let mut valid = vec![false; out_w * out_h];
    values.par_chunks_mut(out_w).zip(valid.par_chunks_mut(out_w)).enumerate().for_each(|(row, (vals, ok))| {
        for col in 0..out_w {
            if let Some(z) = ground_depth_at(&scaled, plane, col as f64, row as f64) {
                if z <= max_depth {
                    vals[col] = z;
                    ok[col] = true;
                }
            }
        }
    });
    Ok(DepthMap { width: out_w, height: out_h, values, valid })
}

/// Log-inverse cross-row difference of a ground depth map.
///
/// Output row `r ≥ 1` holds `ln(1 / (gd[r-1] - gd[r]) + 1)`, the depth step
/// from the row above; row 0 repeats row 1 so the map keeps the input height.
/// Pixels where either row is invalid or the step is not positive are 0 and
/// invalid.
pub fn ground_gradient_map(gd: &DepthMap) -> Result<GradientMap> {
    let (w, h) = (gd.width, gd.height);
    if h < 2 {
        return Err(Error::TooFewRows(h));
    }
    let mut values = vec![0.0; w * h];
    let mut valid = vec![false; w * h];
    values[w..].par_chunks_mut(w).zip(valid[w..].par_chunks_mut(w)).enumerate().for_each(|(i, (vals, ok))| {
        let (above, below) = (i * w, (i + 1) * w);
        for col in 0..w {
            if !(gd.valid[above + col] && gd.valid[below + col]) {
                continue;
            }
            let step = gd.values[above + col] - gd.values[below + col];
            if step > 0.0 {
                let g = (1.0 / step + 1.0).ln();
                if g.is_finite() {
                    vals[col] = g;
                    ok[col] = true;
                }
            }
        }
    });
    let (top, rest) = values.split_at_mut(w);
    top.copy_from_slice(&rest[..w]);
    let (top, rest) = valid.split_at_mut(w);
    top.copy_from_slice(&rest[..w]);
    Ok(GradientMap { width: w, height: h, values, valid })
}
