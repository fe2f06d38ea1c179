use serde::{Deserialize, Serialize};

use super::{CameraModel, Observation};
use crate::{Pose, Vec3};

/// A 3D point with an optional fruitlet label.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabeledPoint {
    pub position: Vec3,
    pub label: Option<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DepthFilterParams {
    pub bilateral: bool,
    pub sigma_spatial_px: f64,
    pub sigma_depth_m: f64,
    pub discontinuity: bool,
    /// Largest depth change to a 4-neighbour that keeps a pixel.
    pub discontinuity_m_per_px: f64,
    /// Only every `stride`-th pixel in each direction becomes a point.
    pub stride: usize,
}

impl Default for DepthFilterParams {
    fn default() -> Self {
        Self {
            bilateral: true,
            sigma_spatial_px: 3.0,
            sigma_depth_m: 0.002,
            discontinuity: true,
            discontinuity_m_per_px: 0.005,
            stride: 1,
        }
    }
}

impl DepthFilterParams {
    pub fn disabled() -> Self {
        Self {
            bilateral: false,
            discontinuity: false,
            ..Default::default()
        }
    }
}

fn depth_image(obs: &Observation, camera: &CameraModel) -> Vec<f64> {
    obs.disparity
        .iter()
        .map(|&d| {
            if d.is_finite() && d > 0.0 {
                camera.disparity_to_depth(d as f64)
            } else {
                f64::NAN
            }
        })
        .collect()
}

fn bilateral_at(depth: &[f64], w: usize, h: usize, u: usize, v: usize, p: &DepthFilterParams) -> f64 {
    let z0 = depth[v * w + u];
    let rad = (2.0 * p.sigma_spatial_px).ceil() as isize;
    let (inv_s, inv_d) = (
        1.0 / (2.0 * p.sigma_spatial_px * p.sigma_spatial_px),
        1.0 / (2.0 * p.sigma_depth_m * p.sigma_depth_m),
    );
    let (mut num, mut den) = (0.0, 0.0);
    for dv in -rad..=rad {
        let y = v as isize + dv;
        if y < 0 || y >= h as isize {
            continue;
        }
        for du in -rad..=rad {
            let x = u as isize + du;
            if x < 0 || x >= w as isize {
                continue;
            }
            let z = depth[y as usize * w + x as usize];
            if !z.is_finite() {
                continue;
            }
            let wgt = (-((du * du + dv * dv) as f64) * inv_s - (z - z0) * (z - z0) * inv_d).exp();
            num += wgt * z;
            den += wgt;
        }
    }
    num / den
}

/// Depth change to the farthest valid 4-neighbour, 0 when none are valid.
pub fn max_neighbour_step(depth: &[f64], w: usize, h: usize, u: usize, v: usize) -> f64 {
    let z0 = depth[v * w + u];
    let mut m: f64 = 0.0;
    let mut probe = |x: usize, y: usize| {
        let z = depth[y * w + x];
        if z.is_finite() {
            m = m.max((z - z0).abs());
        }
    };
    if u > 0 {
        probe(u - 1, v);
    }
    if u + 1 < w {
        probe(u + 1, v);
    }
    if v > 0 {
        probe(u, v - 1);
    }
    if v + 1 < h {
        probe(u, v + 1);
    }
    m
}

/// Camera-frame labelled cloud from one observation.
///
/// Pixels whose raw depth jumps by more than the discontinuity threshold to
/// any 4-neighbour are dropped; survivors take their bilaterally smoothed
/// depth.
pub fn extract_roi_cloud(obs: &Observation, camera: &CameraModel, filter: &DepthFilterParams) -> Vec<LabeledPoint> {
    let (w, h) = (obs.width, obs.height);
    let depth = depth_image(obs, camera);
    let stride = filter.stride.max(1);
    let mut out = Vec::new();
    for v in (0..h).step_by(stride) {
        for u in (0..w).step_by(stride) {
            let z = depth[v * w + u];
            if !z.is_finite() {
                continue;
            }
            if filter.discontinuity && max_neighbour_step(&depth, w, h, u, v) > filter.discontinuity_m_per_px {
                continue;
            }
            let z = if filter.bilateral {
                bilateral_at(&depth, w, h, u, v, filter)
            } else {
                z
            };
            out.push(LabeledPoint {
                position: camera.back_project(u as f64, v as f64, z),
                label: obs.label(u, v),
            });
        }
    }
    out
}

pub fn cloud_to_world(cloud: &[LabeledPoint], pose: &Pose) -> Vec<LabeledPoint> {
    cloud
        .iter()
        .map(|p| LabeledPoint {
            position: pose.transform_point(&p.position.into()).coords,
            label: p.label,
        })
        .collect()
}
