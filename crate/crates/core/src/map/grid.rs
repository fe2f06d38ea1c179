use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use super::VoxelKey;

/// Tri-state occupancy derived from log-odds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OccupancyState {
    Free,
    Occupied,
    Unknown,
}

/// Log-odds update model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogOddsParams {
    pub hit: f32,
    pub miss: f32,
    pub clamp_min: f32,
    pub clamp_max: f32,
    /// Log-odds at or above which a voxel is occupied.
    pub occupied_threshold: f32,
}

impl Default for LogOddsParams {
    fn default() -> Self {
        Self {
            hit: 0.85,
            miss: -0.4,
            clamp_min: -3.5,
            clamp_max: 3.5,
            occupied_threshold: 0.0,
        }
    }
}

impl LogOddsParams {
    pub fn state_of(&self, log_odds: f32) -> OccupancyState {
        if log_odds >= self.occupied_threshold {
            OccupancyState::Occupied
        } else {
            OccupancyState::Free
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Cell {
    pub log_odds: f32,
    pub roi: bool,
}

/// Sparse voxel store at one resolution.
///
/// Only observed voxels are stored; absent keys are unknown.
#[derive(Clone, Debug)]
pub struct VoxelMap {
    resolution: f64,
    params: LogOddsParams,
    cells: FxHashMap<VoxelKey, Cell>,
}

impl VoxelMap {
    pub fn new(resolution: f64, params: LogOddsParams) -> Self {
        Self {
            resolution,
            params,
            cells: FxHashMap::default(),
        }
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn params(&self) -> &LogOddsParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn get(&self, key: &VoxelKey) -> Option<&Cell> {
        self.cells.get(key)
    }

    #[inline]
    pub fn state(&self, key: &VoxelKey) -> OccupancyState {
        match self.cells.get(key) {
            Some(c) => self.params.state_of(c.log_odds),
            None => OccupancyState::Unknown,
        }
    }

    pub fn is_roi(&self, key: &VoxelKey) -> bool {
        self.cells.get(key).is_some_and(|c| c.roi)
    }

    /// Applies one hit or miss, clamping the result.
    pub fn update(&mut self, key: VoxelKey, hit: bool) {
        let p = self.params;
        let cell = self.cells.entry(key).or_default();
        let delta = if hit { p.hit } else { p.miss };
        cell.log_odds = (cell.log_odds + delta).clamp(p.clamp_min, p.clamp_max);
    }

    /// Marks an already stored voxel as fruit evidence.
    pub fn set_roi(&mut self, key: VoxelKey) {
        if let Some(c) = self.cells.get_mut(&key) {
            c.roi = true;
        }
    }

    pub(crate) fn insert_raw(&mut self, key: VoxelKey, cell: Cell) {
        self.cells.insert(key, cell);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VoxelKey, &Cell)> {
        self.cells.iter()
    }

    /// Cells in ascending key order.
    pub fn sorted_cells(&self) -> Vec<(VoxelKey, Cell)> {
        let mut v: Vec<_> = self.cells.iter().map(|(k, c)| (*k, *c)).collect();
        v.sort_unstable_by_key(|(k, _)| *k);
        v
    }
}
