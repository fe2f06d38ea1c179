//! Incremental voxel grid traversal.
//!
//! Plane-crossing parameters are always computed from the original ray
//! origin, so traversing a sub-interval `[t0, t1]` visits exactly the
//! voxels that a traversal of the whole ray visits inside that interval.

use super::VoxelKey;
use crate::Vec3;

/// One voxel crossed by a ray and the parameter interval spent inside it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VoxelVisit {
    pub key: VoxelKey,
    pub t_in: f64,
    pub t_out: f64,
}

pub struct GridTraversal {
    origin: [f64; 3],
    dir: [f64; 3],
    res: f64,
    key: [i32; 3],
    step: [i32; 3],
    t_max: [f64; 3],
    t_cur: f64,
    t_end: f64,
    done: bool,
}

impl GridTraversal {
    /// Visits voxels of size `res` along `origin + t * dir` for
    /// `t in [t_start, t_end]`. Yields nothing when the interval is empty.
    pub fn new(origin: &Vec3, dir: &Vec3, res: f64, t_start: f64, t_end: f64) -> Self {
        let o = [origin.x, origin.y, origin.z];
        let d = [dir.x, dir.y, dir.z];
        let p = origin + dir * t_start;
        let mut key = [
            (p.x / res).floor() as i32,
            (p.y / res).floor() as i32,
            (p.z / res).floor() as i32,
        ];
        let step = d.map(|v| if v > 0.0 { 1 } else if v < 0.0 { -1 } else { 0 });
        let mut t_max = [f64::INFINITY; 3];
        for a in 0..3 {
            if step[a] == 0 {
                continue;
            }
            // snap the start voxel onto the plane-parameter sequence
            for _ in 0..2 {
                if plane_t(&o, &d, res, &key, &step, a) <= t_start {
                    key[a] += step[a];
                } else if entry_t(&o, &d, res, &key, &step, a) > t_start {
                    key[a] -= step[a];
                } else {
                    break;
                }
            }
            t_max[a] = plane_t(&o, &d, res, &key, &step, a);
        }
        Self {
            origin: o,
            dir: d,
            res,
            key,
            step,
            t_max,
            t_cur: t_start,
            t_end,
            done: !(t_end > t_start),
        }
    }
}

#[inline]
fn plane_t(o: &[f64; 3], d: &[f64; 3], res: f64, key: &[i32; 3], step: &[i32; 3], a: usize) -> f64 {
    let plane = (key[a] + i32::from(step[a] > 0)) as f64 * res;
    (plane - o[a]) / d[a]
}

#[inline]
fn entry_t(o: &[f64; 3], d: &[f64; 3], res: f64, key: &[i32; 3], step: &[i32; 3], a: usize) -> f64 {
    let plane = (key[a] + i32::from(step[a] < 0)) as f64 * res;
    (plane - o[a]) / d[a]
}

impl Iterator for GridTraversal {
    type Item = VoxelVisit;

    #[inline]
    fn next(&mut self) -> Option<VoxelVisit> {
        if self.done {
            return None;
        }
        let mut axis = 0;
        if self.t_max[1] < self.t_max[axis] {
            axis = 1;
        }
        if self.t_max[2] < self.t_max[axis] {
            axis = 2;
        }
        let t_next = self.t_max[axis];
        let visit = VoxelVisit {
            key: VoxelKey::new(self.key[0], self.key[1], self.key[2]),
            t_in: self.t_cur,
            t_out: t_next.min(self.t_end),
        };
        if t_next >= self.t_end {
            self.done = true;
        } else {
            self.key[axis] += self.step[axis];
            self.t_cur = t_next;
            self.t_max[axis] = plane_t(&self.origin, &self.dir, self.res, &self.key, &self.step, axis);
        }
        Some(visit)
    }
}
