//! Desk-scale toolkit for choosing where to put roadside LiDAR sensors.
//!
//! The pipeline, end to end:
//!
//! 1. [`scene`] synthesizes a cross-intersection scenario: candidate sensor
//!    mounts on the periphery, box occluders in the quadrants, and vehicles
//!    moving along lanes over a sequence of frames.
//! 2. [`lidar`] ray-casts each mount against a frame, producing labeled
//!    point clouds, and provides the rigid-transform / fuse / strip / crop
//!    plumbing that multi-sensor processing needs.
//! 3. [`perception`] turns a vehicle-free cloud into per-cell features,
//!    trains a small logistic predictor against a surrogate detection
//!    confidence map, and produces perception ability maps whose sum is the
//!    score a placement is judged by.
//! 4. [`optimizer`] selects a placement under a sensor budget: greedy on
//!    perceptual gain, exhaustive search, seeded random, or a
//!    coverage/density baseline, all behind one strategy interface.
//! 5. [`eval`] runs a proxy detector on the fused cloud of a placement and
//!    reports BEV average precision at fixed IoU thresholds.
//!
//! Everything is deterministic given explicit seeds: repeated runs yield
//! byte-identical artifacts.

pub mod error;
pub mod eval;
pub mod geom;
pub mod jsonio;
pub mod lidar;
pub mod optimizer;
pub mod perception;
pub mod scene;
pub mod seeding;

pub use error::{Error, Result};
