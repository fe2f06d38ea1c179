use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::map::{OccupancyState, VoxelKey, VoxelMap};
use crate::{Result, Vec3};

/// Reachable camera positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WorkspaceSpec {
    /// Spherical shell sector around a robot base.
    Shell(ShellWorkspace),
    /// Explicit set of reachable voxels.
    VoxelSet(VoxelSetWorkspace),
    /// Everything is reachable.
    Unrestricted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellWorkspace {
    pub base: Vec3,
    /// Unit axis of the angular sector.
    pub axis: Vec3,
    pub r_min: f64,
    pub r_max: f64,
    /// Half-angle of the sector around `axis`; `>= pi` disables it.
    pub half_angle_rad: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoxelSetWorkspace {
    pub resolution: f64,
    /// Sorted, deduplicated.
    pub keys: Vec<VoxelKey>,
}

impl ShellWorkspace {
    pub fn contains(&self, p: &Vec3) -> bool {
        let d = p - self.base;
        let r = d.norm();
        if r < self.r_min || r > self.r_max {
            return false;
        }
        if self.half_angle_rad >= std::f64::consts::PI || r == 0.0 {
            return true;
        }
        d.dot(&self.axis) / r >= self.half_angle_rad.cos()
    }

    /// Volume centroid of the shell sector.
    pub fn centroid(&self) -> Vec3 {
        let (a, b) = (self.r_min, self.r_max);
        let radial = 0.75 * (b.powi(4) - a.powi(4)) / (b.powi(3) - a.powi(3));
        let half = self.half_angle_rad.min(std::f64::consts::PI);
        // mean of cos(theta) over a spherical cap of half-angle `half`
        let mean_cos = (1.0 + half.cos()) / 2.0;
        self.base + self.axis * (radial * mean_cos)
    }
}

impl VoxelSetWorkspace {
    pub fn from_keys(resolution: f64, mut keys: Vec<VoxelKey>) -> Self {
        keys.sort_unstable();
        keys.dedup();
        Self { resolution, keys }
    }

    /// Occupied voxels of a serialized map become the reachable set.
    pub fn from_map(map: &VoxelMap) -> Self {
        let keys = map
            .iter()
            .filter(|(_, cell)| map.params().state_of(cell.log_odds) == OccupancyState::Occupied)
            .map(|(k, _)| *k)
            .collect();
        Self::from_keys(map.resolution(), keys)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let key = VoxelKey::from_point(p, self.resolution);
        self.keys.binary_search(&key).is_ok()
    }

    pub fn centroid(&self) -> Option<Vec3> {
        if self.keys.is_empty() {
            return None;
        }
        let sum: Vec3 = self.keys.iter().map(|k| k.center(self.resolution)).sum();
        Some(sum / self.keys.len() as f64)
    }

    pub fn to_map(&self) -> VoxelMap {
        let mut map = VoxelMap::new(self.resolution, Default::default());
        for k in &self.keys {
            map.update(*k, true);
        }
        map
    }
}

impl WorkspaceSpec {
    /// Default reachable shell 0.6 m in front of `target` along -y.
    pub fn default_shell(target: &Vec3) -> Self {
        WorkspaceSpec::Shell(ShellWorkspace {
            base: target + Vec3::new(0.0, -0.6, 0.0),
            axis: Vec3::y(),
            r_min: 0.2,
            r_max: 0.8,
            half_angle_rad: 70f64.to_radians(),
        })
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        match self {
            WorkspaceSpec::Shell(s) => s.contains(p),
            WorkspaceSpec::VoxelSet(v) => v.contains(p),
            WorkspaceSpec::Unrestricted => true,
        }
    }

    pub fn centroid(&self) -> Option<Vec3> {
        match self {
            WorkspaceSpec::Shell(s) => Some(s.centroid()),
            WorkspaceSpec::VoxelSet(v) => v.centroid(),
            WorkspaceSpec::Unrestricted => None,
        }
    }

    /// Straight-line reachability: every sample along `a -> b` at spacing
    /// `step` (endpoints included) lies in the workspace.
    pub fn segment_inside(&self, a: &Vec3, b: &Vec3, step: f64) -> bool {
        let len = (b - a).norm();
        let n = ((len / step).ceil() as usize).max(1);
        (0..=n).all(|i| self.contains(&(a + (b - a) * (i as f64 / n as f64))))
    }

    pub fn load_voxel_set(path: &Path) -> Result<Self> {
        let map = crate::map::io::read_map_file(path)?;
        Ok(WorkspaceSpec::VoxelSet(VoxelSetWorkspace::from_map(&map)))
    }

    pub fn save_voxel_set(&self, path: &Path) -> Result<()> {
        match self {
            WorkspaceSpec::VoxelSet(v) => crate::map::io::write_map_file(&v.to_map(), path),
            _ => Err(crate::Error::InvalidParams("only voxel-set workspaces serialize to map files".into())),
        }
    }
}
