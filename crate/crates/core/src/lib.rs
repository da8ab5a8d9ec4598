//! Support-plane estimation and sampling-based global planning for ground
//! robots on vegetated terrain.
//!
//! The crate estimates the rigid ground hidden under penetrable vegetation by
//! fusing a trajectory-trained multi-output Gaussian process with plane fits
//! on the LiDAR canopy, and plans over those estimates with an informed RRT*
//! that keeps an inflation radius around detected obstacles.

// Negated comparisons are how config validation rejects NaN alongside bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod geom;
pub mod io;
pub mod mvgpr;
pub mod planner;
pub mod support;
pub mod world;

mod config;
pub use config::ConfigError;
