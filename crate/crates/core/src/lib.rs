//! Camera-configuration geometry for multi-camera 3D perception.
//!
//! The crate is organised around the data that flows between stages:
//!
//! - [`camera`]: pinhole intrinsics, camera-to-ego extrinsics, rigs, built-in
//!   dataset presets and the rig JSON format.
//! - [`ground`]: flat-ground plane fitting in camera space, ground depth and
//!   ground gradient maps.
//! - [`priors`]: inverse focal map, Plücker raymap and the assembled prior
//!   stack at feature resolution.
//! - [`modulation`]: focal modulation, the 3×3 spatial-embedding projector and
//!   the final prior/feature concatenation.
//! - [`scene`] and [`render`]: ego-centric isotropic Gaussians built from
//!   RGB-D frames and a tiled, depth-tested disk rasterizer for novel views.
//! - [`augment`]: counter-based camera configuration sampling and focal
//!   resize of raw images.
//! - [`metrics`]: the NDS* aggregate score.
//! - [`io`]: PFM/PGM maps, channel stacks and PLY point clouds.
//!
//! Conventions: the camera frame is x right, y down, z forward. The ego frame
//! is x forward, y left, z up with the origin on the ground below the rear
//! axle, so the ground plane is `z = 0`. Pixel `(col, row)` has its centre at
//! continuous image coordinate `(col, row)`.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod augment;
pub mod camera;
mod error;
pub mod ground;
pub mod io;
pub mod metrics;
pub mod modulation;
pub mod priors;
pub mod render;
pub mod scene;
mod tensor;

pub use camera::{project, unproject, Camera, CameraExtrinsics, CameraIntrinsics, CameraRig, Preset};
pub use error::{Error, Result};
pub use tensor::FeatureTensor;
