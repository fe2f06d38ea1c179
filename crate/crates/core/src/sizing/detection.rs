use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ellipse::{fit_ellipse, Ellipse};
use super::mask::{boundary_edges, boundary_points, PixelMask};
use crate::sim::{CameraModel, Observation};
use crate::{Result, Vec3};

const MAX_OUTLINE_AREA_RATIO: f64 = 1.5;

/// One segmented fruitlet in one frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame_id: u32,
    /// Index within its frame.
    pub index: u32,
    pub mask: PixelMask,
    /// World-frame centroid of the back-projected mask, uncorrected.
    pub centroid: Vec3,
    pub median_disparity: f64,
    /// Full minor axis of the fitted ellipse, pixels.
    pub minor_axis_px: Option<f64>,
    /// Simulator instance id. Evaluation only; never used for association.
    pub gt_label: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionParams {
    pub min_pixels: usize,
    /// A boundary edge counts as silhouette when the pixel beyond it is
    /// invalid or at least this much deeper.
    pub silhouette_depth_gap_m: f64,
    /// Fraction of boundary edges that must be silhouette edges for the
    /// ellipse fit to be trusted.
    pub min_silhouette_fraction: f64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self {
            min_pixels: 20,
            silhouette_depth_gap_m: 0.003,
            min_silhouette_fraction: 0.6,
        }
    }
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

/// Ellipse over the silhouette part of a mask boundary.
///
/// Edges shared with nearer surfaces (occluders) or the image border are
/// left out; `None` if too little of the outline is true silhouette.
pub fn fit_silhouette(mask: &PixelMask, obs: &Observation, camera: &CameraModel, params: &DetectionParams) -> Option<Ellipse> {
    let filled = mask.fill_pinholes();
    let edges = boundary_edges(&filled);
    let depth = |u: usize, v: usize| obs.disparity_at(u, v).map(|d| camera.disparity_to_depth(d));
    let pts: Vec<(f64, f64)> = edges
        .iter()
        .filter(|e| {
            let Some((ou, ov)) = e.outside else { return false };
            match (depth(e.inside.0, e.inside.1), depth(ou, ov)) {
                (_, None) => true,
                (Some(zi), Some(zo)) => zo > zi + params.silhouette_depth_gap_m,
                (None, Some(_)) => false,
            }
        })
        .map(|e| e.point)
        .collect();
    if pts.len() < 5 || (pts.len() as f64) < params.min_silhouette_fraction * edges.len() as f64 {
        return None;
    }
    fit_ellipse(&pts).ok()
}

/// Per-instance detections of one observation, in ascending label order.
pub fn detections_from_observation(obs: &Observation, camera: &CameraModel, params: &DetectionParams) -> Vec<Detection> {
    let mut by_label: std::collections::BTreeMap<u32, Vec<u32>> = Default::default();
    for (i, &l) in obs.instance_mask.iter().enumerate() {
        if l != crate::sim::BACKGROUND {
            by_label.entry(l).or_default().push(i as u32);
        }
    }
    let mut out = Vec::new();
    for (label, idx) in by_label {
        if idx.len() < params.min_pixels {
            continue;
        }
        let mut disp = Vec::with_capacity(idx.len());
        let mut sum = Vec3::zeros();
        for &i in &idx {
            let (u, v) = (i as usize % obs.width, i as usize / obs.width);
            if let Some(d) = obs.disparity_at(u, v) {
                disp.push(d);
                sum += camera.back_project(u as f64, v as f64, camera.disparity_to_depth(d));
            }
        }
        let n = disp.len();
        let Some(d_med) = median(&mut disp) else { continue };
        if !(d_med > 0.0) {
            continue;
        }
        let centroid_cam = sum / n as f64;
        let mask = PixelMask::from_indices(obs.width, obs.height, &idx);
        let minor = fit_silhouette(&mask, obs, camera, params).map(|e| e.minor);
        out.push(Detection {
            frame_id: obs.frame_id,
            index: out.len() as u32,
            mask,
            centroid: obs.camera_pose.transform_point(&centroid_cam.into()).coords,
            median_disparity: d_med,
            minor_axis_px: minor,
            gt_label: Some(label),
        });
    }
    out
}

impl Detection {
    /// Minor axis from the stored fit, or a fit over the full mask outline.
    /// The outline fit is dropped when its ellipse is much larger than the
    /// mask it was fit to (slivers give degenerate fits).
    pub fn minor_axis(&self) -> Option<f64> {
        self.minor_axis_px.or_else(|| {
            let filled = self.mask.fill_pinholes();
            let e = fit_ellipse(&boundary_points(&filled)).ok()?;
            let area = std::f64::consts::FRAC_PI_4 * e.major * e.minor;
            (area <= MAX_OUTLINE_AREA_RATIO * filled.len() as f64).then_some(e.minor)
        })
    }
}

/// Photogrammetric size `b * a_minor / d_med` in metres.
pub fn size_detection(det: &Detection, camera: &CameraModel) -> Option<f64> {
    if !(det.median_disparity > 0.0 && det.median_disparity.is_finite()) {
        return None;
    }
    det.minor_axis().map(|a| camera.baseline_m * a / det.median_disparity)
}

pub fn write_detections_json(dets: &[Vec<Detection>], path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string(dets)?)?;
    Ok(())
}

pub fn read_detections_json(path: &Path) -> Result<Vec<Vec<Detection>>> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
