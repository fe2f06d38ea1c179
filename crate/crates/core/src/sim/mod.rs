//! Synthetic orchard scenes and a noisy stereo sensor.
//!
//! Scenes hold ellipsoidal fruitlets in clusters, leaf and branch occluders
//! and an anchor marker. [`render`] casts one exact ray per pixel and
//! returns an instance mask plus a disparity image; [`extract_roi_cloud`]
//! turns that into a filtered, labelled point cloud.

mod camera;
mod cloud;
pub mod export;
mod render;
mod scene;

pub use camera::CameraModel;
pub use cloud::{cloud_to_world, extract_roi_cloud, max_neighbour_step, DepthFilterParams, LabeledPoint};
pub use render::{frame_seed, render, wind_offset, NoiseSpec, Observation, BACKGROUND};
pub use scene::{
    cluster_centroid, generate_scene, Backdrop, ClusterSpec, FoliageLevel, FruitletSpec, OccluderSpec, SceneGenParams,
    SceneSpec,
};
