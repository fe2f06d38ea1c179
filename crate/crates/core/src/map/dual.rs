use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{GridTraversal, LogOddsParams, OccupancyState, VoxelKey, VoxelMap};
use crate::attention::AttentionRegion;
use crate::sim::LabeledPoint;
use crate::Vec3;

/// Which trees back the facade.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapLayout {
    /// Coarse outside the attention region, fine inside.
    #[default]
    Dual,
    /// One coarse tree everywhere.
    SingleCoarse,
    /// One fine tree everywhere.
    SingleFine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Coarse,
    Fine,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DualMapConfig {
    pub coarse_res: f64,
    pub fine_res: f64,
    /// Sensor rays longer than this are truncated to free space.
    pub max_range: f64,
    pub log_odds: LogOddsParams,
    pub layout: MapLayout,
}

impl Default for DualMapConfig {
    fn default() -> Self {
        Self {
            coarse_res: 0.01,
            fine_res: 0.003,
            max_range: 1.0,
            log_odds: LogOddsParams::default(),
            layout: MapLayout::Dual,
        }
    }
}

/// One voxel on a cast ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayVoxel {
    pub key: VoxelKey,
    pub map: MapKind,
    pub state: OccupancyState,
    pub roi: bool,
    pub in_attention: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RayTermination {
    HitOccupied,
    MaxRange,
    /// Stopped early at a caller-supplied limit.
    Exited,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RayTraversal {
    pub voxels: Vec<RayVoxel>,
    pub termination: RayTermination,
}

/// Result of a point lookup.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VoxelQuery {
    pub key: VoxelKey,
    pub map: MapKind,
    pub state: OccupancyState,
    pub roi: bool,
}

#[derive(Clone, Copy, Debug)]
struct Segment {
    t0: f64,
    t1: f64,
    map: MapKind,
    in_attention: bool,
}

/// Coarse scene-wide map plus fine attention-bounded map behind one facade.
///
/// In [`MapLayout::Dual`] every ray is split at its two intersections with
/// the attention sphere; the outside pieces walk the coarse grid and the
/// inside piece walks the fine grid. The fine tree therefore only ever stores
/// voxels that intersect the attention ball.
#[derive(Clone, Debug)]
pub struct DualMap {
    cfg: DualMapConfig,
    attention: AttentionRegion,
    coarse: VoxelMap,
    fine: VoxelMap,
}

impl DualMap {
    pub fn new(cfg: DualMapConfig, attention: AttentionRegion) -> Self {
        assert!(cfg.fine_res < cfg.coarse_res, "fine resolution must be finer than coarse");
        let coarse = VoxelMap::new(cfg.coarse_res, cfg.log_odds);
        let fine = VoxelMap::new(cfg.fine_res, cfg.log_odds);
        Self {
            cfg,
            attention,
            coarse,
            fine,
        }
    }

    pub fn config(&self) -> &DualMapConfig {
        &self.cfg
    }

    pub fn attention(&self) -> &AttentionRegion {
        &self.attention
    }

    pub fn coarse(&self) -> &VoxelMap {
        &self.coarse
    }

    pub fn fine(&self) -> &VoxelMap {
        &self.fine
    }

    #[cfg(test)]
    pub(crate) fn fine_mut(&mut self) -> &mut VoxelMap {
        &mut self.fine
    }

    pub fn map(&self, kind: MapKind) -> &VoxelMap {
        match kind {
            MapKind::Coarse => &self.coarse,
            MapKind::Fine => &self.fine,
        }
    }

    fn map_mut(&mut self, kind: MapKind) -> &mut VoxelMap {
        match kind {
            MapKind::Coarse => &mut self.coarse,
            MapKind::Fine => &mut self.fine,
        }
    }

    /// Tree used for space inside (`true`) or outside the attention region.
    pub fn owner(&self, inside: bool) -> MapKind {
        match (self.cfg.layout, inside) {
            (MapLayout::SingleCoarse, _) => MapKind::Coarse,
            (MapLayout::SingleFine, _) => MapKind::Fine,
            (MapLayout::Dual, true) => MapKind::Fine,
            (MapLayout::Dual, false) => MapKind::Coarse,
        }
    }

    /// The tree that holds ROI flags and frontiers.
    pub fn attention_map(&self) -> &VoxelMap {
        self.map(self.owner(true))
    }

    fn segments(&self, origin: &Vec3, dir: &Vec3, t_end: f64) -> ([Segment; 3], usize) {
        let empty = Segment {
            t0: 0.0,
            t1: 0.0,
            map: MapKind::Coarse,
            in_attention: false,
        };
        let mut out = [empty; 3];
        let clipped = self
            .attention
            .ray_interval(origin, dir)
            .map(|(a, b)| (a.max(0.0), b.min(t_end)))
            .filter(|(a, b)| a <= b);
        let outside = self.owner(false);
        let inside = self.owner(true);
        let Some((a, b)) = clipped else {
            out[0] = Segment { t0: 0.0, t1: t_end, map: outside, in_attention: false };
            return (out, 1);
        };
        if self.cfg.layout != MapLayout::Dual {
            // one grid; attention membership is decided per voxel interval
            out[0] = Segment { t0: a, t1: b, map: outside, in_attention: true };
            out[1] = Segment { t0: 0.0, t1: t_end, map: outside, in_attention: false };
            return (out, usize::MAX);
        }
        let mut n = 0;
        if a > 0.0 {
            out[n] = Segment { t0: 0.0, t1: a, map: outside, in_attention: false };
            n += 1;
        }
        out[n] = Segment { t0: a, t1: b, map: inside, in_attention: true };
        n += 1;
        if b < t_end {
            out[n] = Segment { t0: b, t1: t_end, map: outside, in_attention: false };
            n += 1;
        }
        (out, n)
    }

    /// Walks the hybrid traversal up to `t_end`, calling `visit` for every
    /// voxel until it returns `false` or an occupied voxel is reached.
    ///
    /// Returns the termination reason and the parameter where walking
    /// stopped.
    pub fn walk_ray<F>(&self, origin: &Vec3, dir: &Vec3, t_end: f64, mut visit: F) -> RayTermination
    where
        F: FnMut(&RayVoxel) -> bool,
    {
        let (segs, n) = self.segments(origin, dir, t_end);
        let mut emit = |key: VoxelKey, map: MapKind, in_attention: bool| -> Option<RayTermination> {
            let m = self.map(map);
            let (state, roi) = match m.get(&key) {
                Some(c) => (m.params().state_of(c.log_odds), c.roi),
                None => (OccupancyState::Unknown, false),
            };
            let rv = RayVoxel { key, map, state, roi, in_attention };
            if !visit(&rv) {
                return Some(RayTermination::Exited);
            }
            (state == OccupancyState::Occupied).then_some(RayTermination::HitOccupied)
        };
        if n == usize::MAX {
            let (attn, whole) = (segs[0], segs[1]);
            let res = self.map(whole.map).resolution();
            for v in GridTraversal::new(origin, dir, res, whole.t0, whole.t1) {
                let in_attention = v.t_out >= attn.t0 && v.t_in <= attn.t1;
                if let Some(t) = emit(v.key, whole.map, in_attention) {
                    return t;
                }
            }
            return RayTermination::MaxRange;
        }
        for seg in &segs[..n] {
            let res = self.map(seg.map).resolution();
            for v in GridTraversal::new(origin, dir, res, seg.t0, seg.t1) {
                if let Some(t) = emit(v.key, seg.map, seg.in_attention) {
                    return t;
                }
            }
        }
        RayTermination::MaxRange
    }

    /// Hybrid ray cast terminating at the first occupied voxel or `max_range`.
    pub fn cast_ray(&self, origin: &Vec3, dir: &Vec3, max_range: f64) -> RayTraversal {
        let mut voxels = Vec::new();
        let termination = self.walk_ray(origin, dir, max_range, |v| {
            voxels.push(*v);
            true
        });
        RayTraversal { voxels, termination }
    }

    /// Integrates a world-frame cloud observed from `sensor_origin`.
    ///
    /// Every voxel crossed by a sensor ray receives one miss and every
    /// endpoint voxel one hit per call (hits win when both apply). Endpoints
    /// labelled as fruit inside the attention region set the ROI flag.
    ///
    /// Returns the number of voxels traversed.
    pub fn insert_cloud(&mut self, cloud: &[LabeledPoint], sensor_origin: &Vec3) -> usize {
        let mut visits = 0;
        let mut free: [FxHashSet<VoxelKey>; 2] = Default::default();
        let mut occupied: [FxHashSet<VoxelKey>; 2] = Default::default();
        let mut roi: [FxHashSet<VoxelKey>; 2] = Default::default();
        let slot = |k: MapKind| match k {
            MapKind::Coarse => 0,
            MapKind::Fine => 1,
        };
        for p in cloud {
            let v = p.position - sensor_origin;
            let len = v.norm();
            if len == 0.0 || !len.is_finite() {
                continue;
            }
            let dir = v / len;
            let (t_end, has_end) = if len > self.cfg.max_range {
                (self.cfg.max_range, false)
            } else {
                (len, true)
            };
            let (segs, n) = self.segments(sensor_origin, &dir, t_end);
            let segs: &[Segment] = if n == usize::MAX { &segs[1..2] } else { &segs[..n] };
            for seg in segs {
                let res = self.map(seg.map).resolution();
                let set = &mut free[slot(seg.map)];
                for visit in GridTraversal::new(sensor_origin, &dir, res, seg.t0, seg.t1) {
                    set.insert(visit.key);
                    visits += 1;
                }
            }
            if has_end {
                let inside = self.attention.contains(&p.position);
                let kind = self.owner(inside);
                let key = VoxelKey::from_point(&p.position, self.map(kind).resolution());
                occupied[slot(kind)].insert(key);
                if inside && p.label.is_some() {
                    roi[slot(kind)].insert(key);
                }
            }
        }
        for kind in [MapKind::Coarse, MapKind::Fine] {
            let s = slot(kind);
            let occ = std::mem::take(&mut occupied[s]);
            let fr = std::mem::take(&mut free[s]);
            let rs = std::mem::take(&mut roi[s]);
            let map = self.map_mut(kind);
            for k in &occ {
                map.update(*k, true);
            }
            for k in fr.iter().filter(|k| !occ.contains(k)) {
                map.update(*k, false);
            }
            for k in rs {
                map.set_roi(k);
            }
        }
        visits
    }

    /// Point lookup; the fine tree answers inside the (closed) attention ball.
    pub fn query_state(&self, point: &Vec3) -> VoxelQuery {
        let kind = self.owner(self.attention.contains(point));
        let map = self.map(kind);
        let key = VoxelKey::from_point(point, map.resolution());
        VoxelQuery {
            key,
            map: kind,
            state: map.state(&key),
            roi: map.is_roi(&key),
        }
    }

    /// SHA-256 over both trees in key order.
    pub fn snapshot_hash(&self) -> String {
        let mut h = Sha256::new();
        for (tag, map) in [(b'c', &self.coarse), (b'f', &self.fine)] {
            h.update([tag]);
            for (k, c) in map.sorted_cells() {
                h.update(k.x.to_le_bytes());
                h.update(k.y.to_le_bytes());
                h.update(k.z.to_le_bytes());
                h.update(c.log_odds.to_le_bytes());
                h.update([u8::from(c.roi)]);
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
