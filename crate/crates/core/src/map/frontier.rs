use super::{DualMap, OccupancyState, VoxelKey};

/// Free voxels of the attention-owning map that touch an ROI voxel and at
/// least one unknown voxel (both 6-adjacent), with centres inside the
/// attention sphere. Sorted by key.
pub fn roi_frontier_voxels(map: &DualMap) -> Vec<VoxelKey> {
    let grid = map.attention_map();
    let res = grid.resolution();
    let attention = map.attention();
    let mut out: Vec<VoxelKey> = grid
        .iter()
        .filter(|(_, c)| c.roi)
        .flat_map(|(k, _)| k.neighbors6())
        .filter(|n| {
            grid.state(n) == OccupancyState::Free
                && attention.contains(&n.center(res))
                && n.neighbors6().iter().any(|m| grid.state(m) == OccupancyState::Unknown)
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}
