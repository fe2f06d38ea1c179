//! Post-planning sizing.
//!
//! Detection centroids from all frames are registered into the first
//! frame's gauge with a robust all-pairs objective, linked into a graph of
//! nearby cross-frame detections, and split into fruitlet tracks by highly
//! connected subgraph clustering. Each detection is sized from its ellipse
//! minor axis and median disparity; a track reports its largest member.

mod association;
mod detection;
mod ellipse;
mod mask;
mod registration;
mod tracks;

pub use association::{build_association_graph, hcs_cluster, hcs_on_edges, AssociationGraph, HcsParams, LocalGraph};
pub use detection::{
    detections_from_observation, fit_silhouette, read_detections_json, size_detection, write_detections_json, Detection,
    DetectionParams,
};
pub use ellipse::{conic_to_ellipse, fit_ellipse, Ellipse};
pub use mask::{boundary_edges, boundary_points, BoundaryEdge, PixelMask};
pub use registration::{
    arctan_loss, exp_so3, objective_gradient, register_global, registration_objective, right_jacobian, skew, FrameTransformSet,
    RegistrationParams,
};
pub use tracks::{run_sizing, size_tracks, write_sizing_csv, FruitletTrack, SizingConfig, SizingResult, SizingRow};
