//! Active perception pipeline for sizing small fruit.
//!
//! The crate is organised the way data flows through an episode:
//!
//! - [`sim`]: procedural orchard scenes and a noisy stereo sensor.
//! - [`map`]: coarse scene-wide and fine attention-bounded occupancy maps
//!   behind a single hybrid ray-casting facade.
//! - [`attention`]: target cluster extraction, the attention sphere and the
//!   reachable workspace.
//! - [`planner`]: frontier-targeted viewpoint sampling, attention-gated
//!   information gain and the next-best-view loop.
//! - [`sizing`]: robust multi-frame registration, highly connected subgraph
//!   association, ellipse fitting and photogrammetric sizing.
//! - [`harness`]: planner variants, metrics, experiments and reports.

pub mod attention;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod map;
pub mod planner;
pub mod sim;
pub mod sizing;

pub use error::{Error, Result};
pub use geometry::{Pose, Vec3};
