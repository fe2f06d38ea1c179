use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vec3};

/// Closed ball around the target cluster.
///
/// Only unknown voxels inside it contribute to information gain, the fine
/// map lives inside it, and frontier targets are drawn from it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionRegion {
    pub center: Vec3,
    pub radius: f64,
}

impl AttentionRegion {
    pub fn new(center: Vec3, radius: f64) -> Self {
        Self { center, radius }
    }

    /// Closed-ball membership; boundary points belong to the region.
    pub fn contains(&self, p: &Vec3) -> bool {
        (p - self.center).norm_squared() <= self.radius * self.radius
    }

    /// Parameter interval where `origin + t * dir` is inside the ball.
    pub fn ray_interval(&self, origin: &Vec3, dir: &Vec3) -> Option<(f64, f64)> {
        crate::geometry::ray_ball_interval(origin, dir, &self.center, self.radius)
    }
}

/// Sphere around `members`: centred on their mean, radius = farthest member
/// distance plus `margin`, never below `min_radius`.
pub fn fit_attention_sphere(members: &[Vec3], margin: f64, min_radius: f64) -> Result<AttentionRegion> {
    if members.is_empty() {
        return Err(Error::NoFruitletsDetected);
    }
    let center = members.iter().sum::<Vec3>() / members.len() as f64;
    let spread = members.iter().map(|m| (m - center).norm()).fold(0.0, f64::max);
    Ok(AttentionRegion::new(center, (spread + margin).max(min_radius)))
}
