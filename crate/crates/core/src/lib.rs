//! Rail track geometry measurement from airborne LiDAR and IMU data.
//!
//! The crate implements the full measurement chain as a library:
//!
//! * [`types`] — geometric primitives, sensor frames, and the IMU→LiDAR
//!   axis reconciliation applied at ingestion.
//! * [`imu`] — dead-reckoning propagation and preintegrated motion
//!   increments between keyframes.
//! * [`segmentation`] — a point-wise rail/background segmentation network
//!   (local spatial encoding + attentive pooling) trained from scratch
//!   with exact analytic gradients.
//! * [`registration`] — roughness-based feature extraction, a rolling
//!   voxel feature map, and Gauss–Newton scan matching seeded by IMU
//!   preintegration.
//! * [`geometry`] — PCA corridor alignment, quadratic-fit outlier
//!   rejection, and sliding-window gauge / curvature / profile
//!   measurement.
//! * [`synth`] — a synthetic oracle: parametric tracks with known
//!   geometry, an analytic ray-casting LiDAR simulator, and IMU trace
//!   generation for prescribed flight paths.
//! * [`io`] — the on-disk artifact formats shared with the CLI.
//!
//! Data-parallel inner loops (ray casting, batch training, window
//! measurement) run on rayon when the default `parallel` feature is
//! enabled and fall back to sequential iteration otherwise. All parallel
//! reductions are ordered, so both modes produce bit-identical results.

pub mod exec;
pub mod geometry;
pub mod imu;
pub mod io;
pub mod registration;
pub mod segmentation;
pub mod spatial;
pub mod synth;
pub mod types;

pub use types::{Pose, Rotation, Vec3};
