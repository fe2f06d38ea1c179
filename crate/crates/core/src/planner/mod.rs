//! Next-best-view planning.
//!
//! Each round picks targets among ROI frontier voxels, samples candidate
//! poses on partial Fibonacci spheres around them, scores every candidate
//! by information gain minus motion cost and moves to the best feasible
//! one. Random and evenly spaced samplers share the same loop.

mod episode;
mod gain;
mod heap;
mod sampling;

pub use episode::{plan_episode, Episode, EpisodeConfig, PlanningLog, PlanningRecord, StopReason};
pub use gain::{information_gain, information_gain_counted, ray_gain, utility, GainMode, RayGrid};
pub use heap::{next_best_view, UtilityHeap};
pub use sampling::{
    fibonacci_hemisphere, fibonacci_sphere, random_hemisphere_direction, sample_viewpoints, select_targets,
    workspace_pole,
};

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vec3};

/// Candidate camera pose looking at `target`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Viewpoint {
    /// Generation order within a sampling round.
    pub index: usize,
    pub position: Vec3,
    pub target: Vec3,
    pub ig: f64,
    pub cost: f64,
    pub utility: f64,
}

impl Viewpoint {
    pub fn new(index: usize, position: Vec3, target: Vec3) -> Self {
        Self {
            index,
            position,
            target,
            ig: 0.0,
            cost: 0.0,
            utility: 0.0,
        }
    }
}

/// When an episode stops.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    /// Number of moves after the initial observation.
    Iterations(u32),
    /// Measured evaluation time plus simulated motion time.
    WallSeconds(f64),
    /// Evaluation time modelled from voxel visits plus simulated motion
    /// time; deterministic.
    ModeledSeconds(f64),
}

/// How candidate poses are produced.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewSampler {
    /// Scored candidates around ROI frontier voxels.
    #[default]
    Frontier,
    /// Uniformly random poses on the hemisphere around the attention region.
    Random,
    /// Evenly spaced poses on the same hemisphere, visited nearest first.
    Even,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub sensor_distance: f64,
    pub fib_points: usize,
    /// Frontier voxels nearest the attention centre used as targets.
    pub max_targets: usize,
    /// Motion cost weight per metre.
    pub alpha: f64,
    pub utility_threshold: f64,
    /// Ray grid `[columns, rows]` over the image.
    pub rays_per_viewpoint: [usize; 2],
    pub max_ray_range: f64,
    pub budget: Budget,
    pub motion_time_per_meter: f64,
    pub gain: GainMode,
    pub sampler: ViewSampler,
    /// Pose count of the random and even samplers' sphere.
    pub naive_points: usize,
    /// Sample spacing of the straight-line feasibility test.
    pub path_step: f64,
    /// Modelled evaluation cost of one voxel visit.
    pub seconds_per_voxel_visit: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            sensor_distance: 0.25,
            fib_points: 64,
            max_targets: 32,
            alpha: 0.005,
            utility_threshold: 0.0,
            rays_per_viewpoint: [16, 12],
            max_ray_range: 1.0,
            budget: Budget::Iterations(25),
            motion_time_per_meter: 10.0,
            gain: GainMode::Attention,
            sampler: ViewSampler::Frontier,
            naive_points: 32,
            path_step: 0.01,
            seconds_per_voxel_visit: 2e-7,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.into()));
        if !(self.alpha >= 0.0) {
            return bad("alpha must be non-negative");
        }
        if self.fib_points == 0 || self.naive_points == 0 {
            return bad("sphere point counts must be positive");
        }
        if !(self.sensor_distance > 0.0 && self.max_ray_range > 0.0 && self.path_step > 0.0) {
            return bad("distances must be positive");
        }
        if self.rays_per_viewpoint.contains(&0) {
            return bad("ray grid must be non-empty");
        }
        match self.budget {
            Budget::WallSeconds(s) | Budget::ModeledSeconds(s) if !(s >= 0.0) => bad("budget must be non-negative"),
            _ => Ok(()),
        }
    }
}
