use serde::{Deserialize, Serialize};

use super::Viewpoint;
use crate::geometry::look_at;
use crate::map::{DualMap, OccupancyState};
use crate::sim::CameraModel;
use crate::Vec3;

/// How a ray scores the voxels it crosses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainMode {
    /// Unknown fraction of the voxels inside the attention region.
    #[default]
    Attention,
    /// Unknown fraction of every voxel along the ray.
    Unobserved,
}

/// Unit ray directions in the camera frame on a regular grid over the
/// image.
#[derive(Clone, Debug, PartialEq)]
pub struct RayGrid {
    pub dirs: Vec<Vec3>,
}

impl RayGrid {
    pub fn new(camera: &CameraModel, cols: usize, rows: usize) -> Self {
        let mut dirs = Vec::with_capacity(cols * rows);
        for j in 0..rows {
            for i in 0..cols {
                let u = (i as f64 + 0.5) * camera.width_px as f64 / cols as f64 - 0.5;
                let v = (j as f64 + 0.5) * camera.height_px as f64 / rows as f64 - 0.5;
                dirs.push(camera.ray(u, v).normalize());
            }
        }
        Self { dirs }
    }

    /// World-frame directions for a camera at `vp` looking at its target.
    pub fn world_dirs(&self, vp: &Viewpoint) -> Vec<Vec3> {
        let pose = look_at(&vp.position, &vp.target);
        self.dirs.iter().map(|d| pose.rotation * d).collect()
    }
}

/// Per-ray gain and the number of voxels visited to compute it.
pub fn ray_gain(map: &DualMap, origin: &Vec3, dir: &Vec3, max_range: f64, mode: GainMode) -> (f64, usize) {
    let (mut n, mut unknown, mut visits) = (0usize, 0usize, 0usize);
    let t_end = match mode {
        GainMode::Unobserved => max_range,
        GainMode::Attention => {
            // past the sphere nothing can count
            let Some((a, b)) = map.attention().ray_interval(origin, dir) else {
                return (0.0, 0);
            };
            let t_end = b.min(max_range);
            if b < 0.0 || a > t_end {
                return (0.0, 0);
            }
            t_end
        }
    };
    map.walk_ray(origin, dir, t_end, |v| {
        visits += 1;
        if mode == GainMode::Unobserved || v.in_attention {
            n += 1;
            if v.state == OccupancyState::Unknown {
                unknown += 1;
            }
        }
        true
    });
    let g = if n > 0 { unknown as f64 / n as f64 } else { 0.0 };
    (g, visits)
}

/// Mean ray gain over the grid, plus total voxel visits.
pub fn information_gain_counted(
    map: &DualMap,
    vp: &Viewpoint,
    rays: &RayGrid,
    max_range: f64,
    mode: GainMode,
) -> (f64, usize) {
    if rays.dirs.is_empty() {
        return (0.0, 0);
    }
    let mut sum = 0.0;
    let mut visits = 0;
    for d in rays.world_dirs(vp) {
        let (g, n) = ray_gain(map, &vp.position, &d, max_range, mode);
        sum += g;
        visits += n;
    }
    (sum / rays.dirs.len() as f64, visits)
}

pub fn information_gain(map: &DualMap, vp: &Viewpoint, rays: &RayGrid, max_range: f64, mode: GainMode) -> f64 {
    information_gain_counted(map, vp, rays, max_range, mode).0
}

/// `ig - alpha * |position - current|`.
pub fn utility(ig: f64, position: &Vec3, current: &Vec3, alpha: f64) -> f64 {
    ig - alpha * (position - current).norm()
}
