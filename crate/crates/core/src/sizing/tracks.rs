use std::io::Write;

use serde::{Deserialize, Serialize};

use super::association::{build_association_graph, hcs_cluster, AssociationGraph, HcsParams};
use super::detection::{size_detection, Detection};
use super::registration::{register_global, FrameTransformSet, RegistrationParams};
use crate::sim::CameraModel;
use crate::{Result, Vec3};

/// One physical fruitlet recovered by association.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FruitletTrack {
    pub track_id: u32,
    /// `(frame, detection index)` per member, at most one per frame.
    pub members: Vec<(usize, usize)>,
    pub member_sizes: Vec<Option<f64>>,
    /// Largest member size, metres.
    pub final_size: Option<f64>,
    /// Mean registered centroid of the members, frame-0 gauge.
    pub position: Vec3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SizingConfig {
    pub registration: RegistrationParams,
    /// Association edge threshold, metres.
    pub tau: f64,
    pub hcs: HcsParams,
}

impl Default for SizingConfig {
    fn default() -> Self {
        Self {
            registration: RegistrationParams::default(),
            tau: 0.006,
            hcs: HcsParams::default(),
        }
    }
}

/// Turns clusters into tracks: one member per frame (the one nearest the
/// cluster centroid), sizes per member, final size = max.
pub fn size_tracks(
    clusters: &[Vec<usize>],
    graph: &AssociationGraph,
    detections: &[Vec<Detection>],
    camera: &CameraModel,
    min_cluster_size: usize,
) -> Vec<FruitletTrack> {
    let mut out = Vec::new();
    for cluster in clusters {
        let centre = cluster.iter().map(|&n| graph.positions[n]).sum::<Vec3>() / cluster.len() as f64;
        let mut kept: Vec<usize> = Vec::new();
        for &n in cluster {
            let frame = graph.origin[n].0;
            match kept.iter().position(|&k| graph.origin[k].0 == frame) {
                Some(i) => {
                    let d_new = (graph.positions[n] - centre).norm();
                    let d_old = (graph.positions[kept[i]] - centre).norm();
                    if d_new < d_old {
                        kept[i] = n;
                    }
                }
                None => kept.push(n),
            }
        }
        if kept.len() < min_cluster_size {
            continue;
        }
        let members: Vec<(usize, usize)> = kept.iter().map(|&n| graph.origin[n]).collect();
        let member_sizes: Vec<Option<f64>> = members
            .iter()
            .map(|&(f, k)| size_detection(&detections[f][k], camera))
            .collect();
        let final_size = member_sizes.iter().flatten().copied().reduce(f64::max);
        let position = kept.iter().map(|&n| graph.positions[n]).sum::<Vec3>() / kept.len() as f64;
        out.push(FruitletTrack {
            track_id: out.len() as u32,
            members,
            member_sizes,
            final_size,
            position,
        });
    }
    out
}

#[derive(Clone, Debug)]
pub struct SizingResult {
    pub transforms: FrameTransformSet,
    pub graph: AssociationGraph,
    pub tracks: Vec<FruitletTrack>,
}

/// Registration, association, clustering and sizing over per-frame
/// detections.
pub fn run_sizing(detections: &[Vec<Detection>], camera: &CameraModel, cfg: &SizingConfig) -> SizingResult {
    let frames: Vec<Vec<Vec3>> = detections
        .iter()
        .map(|f| f.iter().map(|d| d.centroid).collect())
        .collect();
    let transforms = register_global(&frames, &cfg.registration);
    let graph = build_association_graph(&frames, &transforms, cfg.tau);
    let clusters = hcs_cluster(&graph, &cfg.hcs);
    let tracks = size_tracks(&clusters, &graph, detections, camera, cfg.hcs.min_cluster_size);
    SizingResult {
        transforms,
        graph,
        tracks,
    }
}

/// Row of the sizing report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizingRow {
    pub track_id: u32,
    pub n_members: usize,
    pub final_size_mm: Option<f64>,
    pub gt_size_mm: Option<f64>,
    pub matched_gt_id: Option<u32>,
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_sizing_csv<W: Write>(rows: &[SizingRow], mut w: W) -> Result<()> {
    writeln!(w, "track_id,n_members,final_size_mm,gt_size_mm,matched_gt_id")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.track_id,
            r.n_members,
            opt(r.final_size_mm.map(|v| format!("{v:.4}"))),
            opt(r.gt_size_mm.map(|v| format!("{v:.4}"))),
            opt(r.matched_gt_id)
        )?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sizing::mask::PixelMask;

    fn det(frame: u32, minor: f64) -> Detection {
        Detection {
            frame_id: frame,
            index: 0,
            mask: PixelMask::from_indices(2, 2, &[0]),
            centroid: Vec3::zeros(),
            median_disparity: 120.0,
            minor_axis_px: Some(minor),
            gt_label: None,
        }
    }

    #[test]
    fn final_size_is_member_max() {
        let cam = CameraModel::default();
        // 9.1, 9.8, 8.7 mm at 120 px disparity
        let dets = vec![vec![det(0, 18.2)], vec![det(1, 19.6)], vec![det(2, 17.4)]];
        let graph = AssociationGraph {
            positions: vec![Vec3::zeros(); 3],
            origin: vec![(0, 0), (1, 0), (2, 0)],
            edges: vec![(0, 1), (0, 2), (1, 2)],
        };
        let t = size_tracks(&[vec![0, 1, 2]], &graph, &dets, &cam, 2);
        assert_eq!(t.len(), 1);
        assert!((t[0].final_size.unwrap() - 0.0098).abs() < 1e-12);
        assert!(size_tracks(&[vec![0]], &graph, &dets, &cam, 2).is_empty());
    }

    #[test]
    fn duplicate_frame_keeps_nearest() {
        let cam = CameraModel::default();
        let dets = vec![vec![det(0, 20.0), det(0, 30.0)], vec![det(1, 20.0)]];
        let graph = AssociationGraph {
            positions: vec![Vec3::zeros(), Vec3::new(0.004, 0.0, 0.0), Vec3::new(0.001, 0.0, 0.0)],
            origin: vec![(0, 0), (0, 1), (1, 0)],
            edges: vec![(0, 2), (1, 2)],
        };
        let t = size_tracks(&[vec![0, 1, 2]], &graph, &dets, &cam, 2);
        assert_eq!(t[0].members, vec![(0, 0), (1, 0)]);
    }

    #[test]
    fn csv_header_and_blank_options() {
        let rows = vec![SizingRow {
            track_id: 0,
            n_members: 3,
            final_size_mm: Some(9.8),
            gt_size_mm: None,
            matched_gt_id: None,
        }];
        let mut buf = Vec::new();
        write_sizing_csv(&rows, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "track_id,n_members,final_size_mm,gt_size_mm,matched_gt_id\n0,3,9.8000,,\n"
        );
    }
}
