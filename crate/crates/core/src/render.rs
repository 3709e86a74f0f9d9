//! Depth-tested disk rasterizer for [`GaussianScene`]s.
//!
//! Each Gaussian is an opaque, hard-edged screen-space ellipse with semi-axes
//! `fu·r/z` and `fv·r/z` around its projected centre. Visibility is nearest
//! wins; equal depths go to the lower Gaussian index. The image is split into
//! square tiles rasterized independently, so the output does not depend on the
//! number of worker threads.

use image::{Rgb, RgbImage};
use nalgebra::Vector3;
use rayon::prelude::*;

use crate::camera::{CameraExtrinsics, CameraIntrinsics, CameraRig};
use crate::scene::GaussianScene;

pub const DEFAULT_Z_NEAR: f64 = 0.05;
pub const DEFAULT_TILE_SIZE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    /// Gaussians with camera-frame depth at or below this are dropped.
    pub z_near: f64,
    pub tile_size: usize,
    /// Drop splats whose footprint misses the image before binning. Output is
    /// identical either way.
    pub frustum_culling: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self { z_near: DEFAULT_Z_NEAR, tile_size: DEFAULT_TILE_SIZE, frustum_culling: true }
    }
}

/// A Gaussian projected into one view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Splat {
    pub u: f64,
    pub v: f64,
    pub ru: f64,
    pub rv: f64,
    pub z: f64,
    pub index: u32,
}

impl Splat {
    /// Projects Gaussian `index`; `None` when it is not in front of `z_near`.
    pub fn project(
        intr: &CameraIntrinsics,
        extr: &CameraExtrinsics,
        center: &Vector3<f64>,
        radius: f64,
        index: u32,
        z_near: f64,
    ) -> Option<Self> {
        let p = extr.ego_to_camera(center);
        if !(p.z > z_near) {
            return None;
        }
        Some(Self {
            u: intr.fu() * p.x / p.z + intr.cu(),
            v: intr.fv() * p.y / p.z + intr.cv(),
            ru: intr.fu() * radius / p.z,
            rv: intr.fv() * radius / p.z,
            z: p.z,
            index,
        })
    }

    /// Whether the pixel centred at `(x, y)` lies inside the footprint.
    #[inline]
    pub fn covers(&self, x: f64, y: f64) -> bool {
        let a = (x - self.u) / self.ru;
        let b = (y - self.v) / self.rv;
        a * a + b * b <= 1.0
    }

    /// Inclusive pixel bounds `(x0, x1, y0, y1)` of the footprint, unclamped.
    pub fn pixel_bounds(&self) -> (f64, f64, f64, f64) {
        ((self.u - self.ru).ceil(), (self.u + self.ru).floor(), (self.v - self.rv).ceil(), (self.v + self.rv).floor())
    }

    /// Pixel bounds clamped to a `width×height` image, or `None` if disjoint.
    fn clamped_bounds(&self, width: usize, height: usize) -> Option<(usize, usize, usize, usize)> {
        let (x0, x1, y0, y1) = self.pixel_bounds();
        let (wf, hf) = (width as f64 - 1.0, height as f64 - 1.0);
        let (x0, x1, y0, y1) = (x0.max(0.0), x1.min(wf), y0.max(0.0), y1.min(hf));
        if !(x0 <= x1 && y0 <= y1) {
            return None;
        }
        Some((x0 as usize, x1 as usize, y0 as usize, y1 as usize))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderTarget {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<[f64; 3]>,
    /// Camera-frame depth in metres, 0 where nothing was hit.
    pub depth: Vec<f64>,
    pub hit: Vec<bool>,
    pub background: [f64; 3],
}

impl RenderTarget {
    pub fn background(width: usize, height: usize, background: [f64; 3]) -> Self {
        Self {
            width,
            height,
            rgb: vec![background; width * height],
            depth: vec![0.0; width * height],
            hit: vec![false; width * height],
            background,
        }
    }

    pub fn hit_count(&self) -> usize {
        self.hit.iter().filter(|&&h| h).count()
    }

    /// 8-bit image, each channel rounded from `[0, 1]`.
    pub fn to_rgb_image(&self) -> RgbImage {
        RgbImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            let c = self.rgb[y as usize * self.width + x as usize];
            Rgb(c.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8))
        })
    }
}

/// Projects every Gaussian; the result is ordered by Gaussian index.
pub fn project_scene(
    scene: &GaussianScene,
    intr: &CameraIntrinsics,
    extr: &CameraExtrinsics,
    z_near: f64,
) -> Vec<Splat> {
    const CHUNK: usize = 1 << 14;
    scene
        .centers
        .par_chunks(CHUNK)
        .zip(scene.radii.par_chunks(CHUNK))
        .enumerate()
        .flat_map_iter(|(k, (centers, radii))| {
            centers
                .iter()
                .zip(radii)
                .enumerate()
                .filter_map(move |(i, (c, &r))| Splat::project(intr, extr, c, r, (k * CHUNK + i) as u32, z_near))
        })
        .collect()
}

struct Tile {
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
    depth: Vec<f64>,
    winner: Vec<u32>,
}

const NO_HIT: u32 = u32::MAX;

pub fn render(
    scene: &GaussianScene,
    intr: &CameraIntrinsics,
    extr: &CameraExtrinsics,
    background: [f64; 3],
    opts: &RenderOptions,
) -> RenderTarget {
    let (width, height) = (intr.width() as usize, intr.height() as usize);
    let ts = opts.tile_size.max(1);
    let (tiles_x, tiles_y) = (width.div_ceil(ts), height.div_ceil(ts));

    let mut splats = project_scene(scene, intr, extr, opts.z_near);
    if opts.frustum_culling {
        splats.retain(|s| s.clamped_bounds(width, height).is_some());
    }

    // Counting sort of splats into tiles, keeping index order inside each bin.
    let ranges: Vec<Option<(usize, usize, usize, usize)>> = splats
        .par_iter()
        .map(|s| s.clamped_bounds(width, height).map(|(x0, x1, y0, y1)| (x0 / ts, x1 / ts, y0 / ts, y1 / ts)))
        .collect();
    let mut offsets = vec![0usize; tiles_x * tiles_y + 1];
    for &(tx0, tx1, ty0, ty1) in ranges.iter().flatten() {
        for ty in ty0..=ty1 {
            for tx in tx0..=tx1 {
                offsets[ty * tiles_x + tx + 1] += 1;
            }
        }
    }
    for t in 1..offsets.len() {
        offsets[t] += offsets[t - 1];
    }
    let mut cursor = offsets.clone();
    let mut bins = vec![0u32; offsets[offsets.len() - 1]];
    for (si, r) in ranges.iter().enumerate() {
        if let Some((tx0, tx1, ty0, ty1)) = *r {
            for ty in ty0..=ty1 {
                for tx in tx0..=tx1 {
                    let t = ty * tiles_x + tx;
                    bins[cursor[t]] = si as u32;
                    cursor[t] += 1;
                }
            }
        }
    }

    let tiles: Vec<Tile> = (0..tiles_x * tiles_y)
        .into_par_iter()
        .map(|t| {
            let (x0, y0) = ((t % tiles_x) * ts, (t / tiles_x) * ts);
            let (w, h) = (ts.min(width - x0), ts.min(height - y0));
            let mut tile = Tile { x0, y0, w, h, depth: vec![f64::INFINITY; w * h], winner: vec![NO_HIT; w * h] };
            for &si in &bins[offsets[t]..offsets[t + 1]] {
                let s = &splats[si as usize];
                let Some((sx0, sx1, sy0, sy1)) = s.clamped_bounds(width, height) else { continue };
                for y in sy0.max(y0)..=sy1.min(y0 + h - 1) {
                    let row = (y - y0) * w;
                    for x in sx0.max(x0)..=sx1.min(x0 + w - 1) {
                        let k = row + x - x0;
                        // Bins are index-ordered, so a strict test keeps the lower index on ties.
                        if s.z < tile.depth[k] && s.covers(x as f64, y as f64) {
                            tile.depth[k] = s.z;
                            tile.winner[k] = s.index;
                        }
                    }
                }
            }
            tile
        })
        .collect();

    let mut out = RenderTarget::background(width, height, background);
    for tile in &tiles {
        for ty in 0..tile.h {
            for tx in 0..tile.w {
                let k = ty * tile.w + tx;
                let g = tile.winner[k];
                if g == NO_HIT {
                    continue;
                }
                let p = (tile.y0 + ty) * width + tile.x0 + tx;
                out.rgb[p] = scene.colors[g as usize];
                out.depth[p] = tile.depth[k];
                out.hit[p] = true;
            }
        }
    }
    out
}

/// One target per rig camera, in rig order.
pub fn render_rig(
    scene: &GaussianScene,
    rig: &CameraRig,
    background: [f64; 3],
    opts: &RenderOptions,
) -> Vec<RenderTarget> {
    rig.cameras().iter().map(|c| render(scene, &c.intrinsics, &c.extrinsics, background, opts)).collect()
}
