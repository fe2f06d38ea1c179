use serde::{Deserialize, Serialize};

use crate::Vec3;

/// Integer voxel coordinates at a fixed resolution.
///
/// Voxel `k` spans `[k * res, (k + 1) * res)` on each axis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VoxelKey {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl VoxelKey {
    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        Self { x, y, z }
    }

    pub fn from_point(p: &Vec3, res: f64) -> Self {
        Self::new(
            (p.x / res).floor() as i32,
            (p.y / res).floor() as i32,
            (p.z / res).floor() as i32,
        )
    }

    pub fn center(&self, res: f64) -> Vec3 {
        Vec3::new(
            (self.x as f64 + 0.5) * res,
            (self.y as f64 + 0.5) * res,
            (self.z as f64 + 0.5) * res,
        )
    }

    pub fn min_corner(&self, res: f64) -> Vec3 {
        Vec3::new(self.x as f64 * res, self.y as f64 * res, self.z as f64 * res)
    }

    pub fn axis(&self, a: usize) -> i32 {
        match a {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    pub fn offset(&self, dx: i32, dy: i32, dz: i32) -> Self {
        Self::new(self.x + dx, self.y + dy, self.z + dz)
    }

    pub fn neighbors6(&self) -> [VoxelKey; 6] {
        [
            self.offset(-1, 0, 0),
            self.offset(1, 0, 0),
            self.offset(0, -1, 0),
            self.offset(0, 1, 0),
            self.offset(0, 0, -1),
            self.offset(0, 0, 1),
        ]
    }
}
