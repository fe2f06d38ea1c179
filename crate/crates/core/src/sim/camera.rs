use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vec3};

/// Rectified stereo pinhole camera; the left camera is the reference.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraModel {
    pub focal_px: f64,
    pub baseline_m: f64,
    pub width_px: usize,
    pub height_px: usize,
    pub cx: f64,
    pub cy: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            focal_px: 600.0,
            baseline_m: 0.06,
            width_px: 640,
            height_px: 480,
            cx: 319.5,
            cy: 239.5,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.focal_px > 0.0 && self.baseline_m > 0.0 && self.width_px > 0 && self.height_px > 0) {
            return Err(Error::InvalidParams("camera focal, baseline and size must be positive".into()));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width_px * self.height_px
    }

    /// Camera-frame ray through pixel centre `(u, v)` with unit depth.
    #[inline]
    pub fn ray(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.focal_px, (v - self.cy) / self.focal_px, 1.0)
    }

    /// Pixel coordinates of a camera-frame point, `None` behind the camera.
    pub fn project(&self, p: &Vec3) -> Option<(f64, f64)> {
        (p.z > 0.0).then(|| (self.cx + self.focal_px * p.x / p.z, self.cy + self.focal_px * p.y / p.z))
    }

    pub fn depth_to_disparity(&self, depth: f64) -> f64 {
        self.focal_px * self.baseline_m / depth
    }

    pub fn disparity_to_depth(&self, disparity: f64) -> f64 {
        self.focal_px * self.baseline_m / disparity
    }

    /// Back-projects pixel `(u, v)` at `depth` into the camera frame.
    pub fn back_project(&self, u: f64, v: f64, depth: f64) -> Vec3 {
        self.ray(u, v) * depth
    }

    /// Half field of view (horizontal, vertical) in radians.
    pub fn half_fov(&self) -> (f64, f64) {
        (
            (self.width_px as f64 / 2.0 / self.focal_px).atan(),
            (self.height_px as f64 / 2.0 / self.focal_px).atan(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn project_back_project_round_trip() {
        let cam = CameraModel::default();
        let p = Vec3::new(0.013, -0.021, 0.31);
        let (u, v) = cam.project(&p).unwrap();
        let q = cam.back_project(u, v, p.z);
        assert!((p - q).norm() < 1e-12);
    }

    #[test]
    fn disparity_depth_inverse() {
        let cam = CameraModel::default();
        assert!((cam.depth_to_disparity(0.3) - 120.0).abs() < 1e-9);
        assert!((cam.disparity_to_depth(120.0) - 0.3).abs() < 1e-12);
    }
}
