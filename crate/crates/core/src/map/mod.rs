//! Occupancy mapping at two resolutions.
//!
//! [`VoxelMap`] is a sparse log-odds grid at one resolution. [`DualMap`]
//! pairs a coarse scene-wide grid with a fine grid confined to the attention
//! sphere and exposes a single ray-casting and insertion facade over both.

mod dual;
mod frontier;
mod grid;
pub mod io;
mod key;
mod traversal;

pub use dual::{DualMap, DualMapConfig, MapKind, MapLayout, RayTermination, RayTraversal, RayVoxel, VoxelQuery};
pub use frontier::roi_frontier_voxels;
pub use grid::{Cell, LogOddsParams, OccupancyState, VoxelMap};
pub use key::VoxelKey;
pub use traversal::{GridTraversal, VoxelVisit};
