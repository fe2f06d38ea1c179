//! Small geometric helpers shared across modules.

use nalgebra::{Isometry3, Matrix3, Rotation3, Translation3, UnitQuaternion, Vector3};

pub type Vec3 = Vector3<f64>;

/// Rigid transform mapping camera coordinates into world coordinates.
pub type Pose = Isometry3<f64>;

/// Camera pose at `position` looking at `target`.
///
/// Uses the optical convention: camera z forward, x right, y down, with
/// world +z as the up reference. Looking straight up or down falls back to
/// world +y as the up reference.
pub fn look_at(position: &Vec3, target: &Vec3) -> Pose {
    let forward = (target - position).normalize();
    let mut right = forward.cross(&Vec3::z());
    if right.norm() < 1e-9 {
        right = forward.cross(&Vec3::y());
    }
    let right = right.normalize();
    let down = forward.cross(&right);
    let rot = Matrix3::from_columns(&[right, down, forward]);
    let rotation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(rot));
    Isometry3::from_parts(Translation3::from(*position), rotation)
}

/// Parameter interval `[t0, t1]` where `origin + t * dir` lies inside the
/// closed ball. `dir` need not be normalized.
pub fn ray_ball_interval(origin: &Vec3, dir: &Vec3, center: &Vec3, radius: f64) -> Option<(f64, f64)> {
    let oc = origin - center;
    let a = dir.norm_squared();
    if a == 0.0 {
        return None;
    }
    let b = oc.dot(dir);
    let c = oc.norm_squared() - radius * radius;
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    Some(((-b - sq) / a, (-b + sq) / a))
}

/// Orthonormal basis `(u, v)` completing `axis` to a right-handed frame.
pub fn orthonormal_basis(axis: &Vec3) -> (Vec3, Vec3) {
    let helper = if axis.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = axis.cross(&helper).normalize();
    let v = axis.cross(&u);
    (u, v)
}

/// Shortest distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Shortest distance between segments `[p0, p1]` and `[q0, q1]`.
pub fn segment_segment_distance(p0: &Vec3, p1: &Vec3, q0: &Vec3, q1: &Vec3) -> f64 {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let (s, t);
    if a <= 1e-18 && e <= 1e-18 {
        return r.norm();
    }
    if a <= 1e-18 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= 1e-18 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 1e-18 {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    ((p0 + d1 * s) - (q0 + d2 * t)).norm()
}
