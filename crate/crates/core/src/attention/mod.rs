//! Target cluster extraction and the regions that bound planning.
//!
//! An initial observation yields 3D fruitlet centroids. They are splatted
//! into a Gaussian density grid whose local maxima become cluster centres;
//! the cluster nearest the anchor marker is the target and a sphere fitted
//! around its members becomes the [`AttentionRegion`].

mod density;
mod region;
mod workspace;

pub use density::{build_density_map, extract_clusters, select_target, CentroidCluster, DensityMap};
pub use region::{fit_attention_sphere, AttentionRegion};
pub use workspace::{ShellWorkspace, VoxelSetWorkspace, WorkspaceSpec};

use serde::{Deserialize, Serialize};

/// Parameters of the target extraction stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttentionConfig {
    pub grid_res: f64,
    pub sigma: f64,
    pub margin: f64,
    pub min_radius: f64,
}

impl Default for AttentionConfig {
    fn default() -> Self {
        Self {
            grid_res: 0.005,
            sigma: 0.015,
            margin: 0.015,
            min_radius: 0.04,
        }
    }
}

/// Runs density clustering, target selection and sphere fitting.
///
/// Returns the attention region and the indices of the centroids assigned
/// to the target cluster.
pub fn extract_attention(
    centroids: &[crate::Vec3],
    anchor: &crate::Vec3,
    cfg: &AttentionConfig,
) -> crate::Result<(AttentionRegion, Vec<usize>)> {
    if centroids.is_empty() {
        return Err(crate::Error::NoFruitletsDetected);
    }
    let density = build_density_map(centroids, cfg.grid_res, cfg.sigma)?;
    let clusters = extract_clusters(&density, centroids);
    let target = select_target(&clusters, anchor)?;
    let members: Vec<crate::Vec3> = clusters[target].members.iter().map(|&i| centroids[i]).collect();
    let region = fit_attention_sphere(&members, cfg.margin, cfg.min_radius)?;
    Ok((region, clusters[target].members.clone()))
}
