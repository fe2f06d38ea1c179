use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{CameraModel, SceneSpec};
use crate::{Pose, Vec3};

/// Mask value of pixels without a fruitlet.
pub const BACKGROUND: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    pub wind_translation_max_m: f64,
    pub wind_translation_typical_m: f64,
    pub disparity_sigma_px: f64,
    /// Probability that a fruitlet pixel loses its label.
    pub dropout_rate: f64,
    /// Probability that a whole visible fruitlet goes unsegmented.
    pub instance_dropout_rate: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            wind_translation_max_m: 0.010,
            wind_translation_typical_m: 0.004,
            disparity_sigma_px: 0.25,
            dropout_rate: 0.05,
            instance_dropout_rate: 0.02,
        }
    }
}

impl NoiseSpec {
    pub fn zero() -> Self {
        Self {
            wind_translation_max_m: 0.0,
            wind_translation_typical_m: 0.0,
            disparity_sigma_px: 0.0,
            dropout_rate: 0.0,
            instance_dropout_rate: 0.0,
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        let all = [
            self.wind_translation_max_m,
            self.wind_translation_typical_m,
            self.disparity_sigma_px,
            self.dropout_rate,
            self.instance_dropout_rate,
        ];
        if all.iter().any(|v| !(*v >= 0.0)) || self.wind_translation_typical_m > self.wind_translation_max_m {
            return Err(crate::Error::InvalidParams(
                "noise terms must be non-negative with typical wind <= max wind".into(),
            ));
        }
        Ok(())
    }
}

/// One rendered stereo frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub frame_id: u32,
    pub camera_pose: Pose,
    pub width: usize,
    pub height: usize,
    /// Row-major fruitlet ids, [`BACKGROUND`] elsewhere.
    pub instance_mask: Vec<u32>,
    /// Row-major disparity in pixels; NaN where nothing was hit.
    pub disparity: Vec<f32>,
    /// Rigid scene shift applied to this frame. Evaluation only.
    pub wind_offset_truth: Vec3,
}

impl Observation {
    pub fn index(&self, u: usize, v: usize) -> usize {
        v * self.width + u
    }

    pub fn label(&self, u: usize, v: usize) -> Option<u32> {
        let l = self.instance_mask[self.index(u, v)];
        (l != BACKGROUND).then_some(l)
    }

    pub fn disparity_at(&self, u: usize, v: usize) -> Option<f64> {
        let d = self.disparity[self.index(u, v)];
        (d.is_finite() && d > 0.0).then_some(d as f64)
    }

    /// Sorted distinct fruitlet ids present in the mask.
    pub fn labels(&self) -> Vec<u32> {
        let mut l: Vec<u32> = self.instance_mask.iter().copied().filter(|&l| l != BACKGROUND).collect();
        l.sort_unstable();
        l.dedup();
        l
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Noise seed of frame `frame` of an episode over scene `scene_seed`.
///
/// Every planner sees the same noise stream for the same frame number.
pub fn frame_seed(scene_seed: u64, frame: u32) -> u64 {
    splitmix64(splitmix64(scene_seed) ^ (frame as u64).wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Counter-based uniform in (0, 1) for pixel `idx` of stream `stream`.
#[inline]
fn pixel_uniform(seed: u64, stream: u64, idx: u64) -> f64 {
    let h = splitmix64(seed ^ splitmix64(stream.wrapping_mul(0x1000_0000_01B3) ^ idx));
    ((h >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

#[inline]
fn pixel_gaussian(seed: u64, idx: u64) -> f64 {
    let u1 = pixel_uniform(seed, 1, idx);
    let u2 = pixel_uniform(seed, 2, idx);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Per-frame rigid scene shift; a pure function of `frame_seed`.
pub fn wind_offset(noise: &NoiseSpec, frame_seed: u64) -> Vec3 {
    if noise.wind_translation_max_m <= 0.0 {
        return Vec3::zeros();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(frame_seed ^ 0x5749_4E44));
    let dir = loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            break v / n;
        }
    };
    let typical = noise.wind_translation_typical_m;
    let mag = match Normal::new(typical, typical / 3.0) {
        Ok(d) if typical > 0.0 => d.sample(&mut rng),
        _ => rng.gen_range(0.0..noise.wind_translation_max_m),
    };
    dir * mag.clamp(0.0, noise.wind_translation_max_m)
}

enum Hit {
    Fruit(u32),
    Other,
}

const TILE: usize = 16;

/// Screen-space bounding box of a world sphere, `None` if off screen.
fn sphere_bbox(cam: &CameraModel, center_cam: &Vec3, r: f64) -> Option<[usize; 4]> {
    let (w, h) = (cam.width_px as f64, cam.height_px as f64);
    if center_cam.z - r <= 1e-6 {
        if center_cam.z + r <= 1e-6 {
            return None;
        }
        return Some([0, 0, cam.width_px - 1, cam.height_px - 1]);
    }
    let (zn, zf) = (center_cam.z - r, center_cam.z + r);
    let ext = |c: f64, lo: bool| {
        let a = if lo { c - r } else { c + r };
        let (p, q) = (a / zn, a / zf);
        if lo {
            p.min(q)
        } else {
            p.max(q)
        }
    };
    let u0 = cam.cx + cam.focal_px * ext(center_cam.x, true) - 1.0;
    let u1 = cam.cx + cam.focal_px * ext(center_cam.x, false) + 1.0;
    let v0 = cam.cy + cam.focal_px * ext(center_cam.y, true) - 1.0;
    let v1 = cam.cy + cam.focal_px * ext(center_cam.y, false) + 1.0;
    if u1 < 0.0 || v1 < 0.0 || u0 > w - 1.0 || v0 > h - 1.0 {
        return None;
    }
    Some([
        u0.max(0.0) as usize,
        v0.max(0.0) as usize,
        u1.min(w - 1.0) as usize,
        v1.min(h - 1.0) as usize,
    ])
}

/// Renders instance mask and disparity by exact ray casting.
///
/// The whole scene is shifted by the frame's wind offset. Noise draws are
/// keyed on `frame_seed` and the pixel index so they do not depend on the
/// pose or on rendering order.
pub fn render(scene: &SceneSpec, pose: &Pose, camera: &CameraModel, noise: &NoiseSpec, frame_seed: u64) -> Observation {
    let (w, h) = (camera.width_px, camera.height_px);
    let wind = wind_offset(noise, frame_seed);
    // shifting the scene by `wind` equals shifting the camera by `-wind`
    let origin = pose.translation.vector - wind;
    let rot = pose.rotation;
    let inv = rot.inverse();
    let fruit: Vec<_> = scene.fruitlets().collect();
    let occ = &scene.occluders;

    let tiles_x = w.div_ceil(TILE);
    let tiles_y = h.div_ceil(TILE);
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); tiles_x * tiles_y];
    let n_fruit = fruit.len();
    let spheres = fruit
        .iter()
        .map(|f| (f.center, f.bounding_radius()))
        .chain(occ.iter().map(|o| o.bounding_sphere()));
    for (i, (c, r)) in spheres.enumerate() {
        let cc = inv * (c - origin);
        if let Some([u0, v0, u1, v1]) = sphere_bbox(camera, &cc, r) {
            for ty in v0 / TILE..=v1 / TILE {
                for tx in u0 / TILE..=u1 / TILE {
                    bins[ty * tiles_x + tx].push(i as u32);
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(frame_seed ^ 0x4452_4F50));
    let dropped: Vec<bool> = fruit
        .iter()
        .map(|_| noise.instance_dropout_rate > 0.0 && rng.gen_bool(noise.instance_dropout_rate.min(1.0)))
        .collect();

    let mut mask = vec![BACKGROUND; w * h];
    let mut disparity = vec![f32::NAN; w * h];
    for v in 0..h {
        for u in 0..w {
            let d_cam = camera.ray(u as f64, v as f64);
            let dir = rot * d_cam;
            let mut best = f64::INFINITY;
            let mut hit = None;
            if let Some(b) = &scene.backdrop {
                if let Some(t) = b.intersect(&origin, &dir, 1e-9) {
                    best = t;
                    hit = Some(Hit::Other);
                }
            }
            for &i in &bins[(v / TILE) * tiles_x + u / TILE] {
                let i = i as usize;
                let t = if i < n_fruit {
                    fruit[i].intersect(&origin, &dir, 1e-9)
                } else {
                    occ[i - n_fruit].intersect(&origin, &dir, 1e-9)
                };
                if let Some(t) = t {
                    if t < best {
                        best = t;
                        hit = Some(if i < n_fruit { Hit::Fruit(i as u32) } else { Hit::Other });
                    }
                }
            }
            let Some(hit) = hit else { continue };
            let idx = v * w + u;
            // unit-depth rays make the parameter equal to depth
            let mut d = camera.depth_to_disparity(best);
            if noise.disparity_sigma_px > 0.0 {
                d += noise.disparity_sigma_px * pixel_gaussian(frame_seed, idx as u64);
            }
            disparity[idx] = d.max(1e-3) as f32;
            if let Hit::Fruit(i) = hit {
                let keep = !dropped[i as usize]
                    && !(noise.dropout_rate > 0.0 && pixel_uniform(frame_seed, 3, idx as u64) < noise.dropout_rate);
                if keep {
                    mask[idx] = fruit[i as usize].fruitlet_id;
                }
            }
        }
    }
    Observation {
        frame_id: 0,
        camera_pose: *pose,
        width: w,
        height: h,
        instance_mask: mask,
        disparity,
        wind_offset_truth: wind,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::WorkspaceSpec;
    use crate::geometry::look_at;
    use crate::sim::{ClusterSpec, FruitletSpec, OccluderSpec};
    use nalgebra::UnitQuaternion;

    fn lone_sphere(diameter: f64) -> SceneSpec {
        SceneSpec {
            rng_seed: 0,
            clusters: vec![ClusterSpec {
                cluster_id: 0,
                is_target: true,
                fruitlets: vec![FruitletSpec {
                    center: Vec3::zeros(),
                    semi_axes: Vec3::repeat(diameter / 2.0),
                    orientation: UnitQuaternion::identity(),
                    cluster_id: 0,
                    fruitlet_id: 0,
                    diameter,
                }],
            }],
            occluders: vec![],
            backdrop: None,
            anchor_position: Vec3::zeros(),
            workspace: WorkspaceSpec::Unrestricted,
        }
    }

    #[test]
    fn zero_noise_disc_matches_pinhole() {
        let scene = lone_sphere(0.01);
        let cam = CameraModel::default();
        let pose = look_at(&Vec3::new(0.0, -0.3, 0.0), &Vec3::zeros());
        let obs = render(&scene, &pose, &cam, &NoiseSpec::zero(), 1);
        let count = obs.instance_mask.iter().filter(|&&l| l == 0).count() as f64;
        // apparent radius of a sphere seen from distance D
        let r_px = cam.focal_px * (0.005f64 / 0.3).asin().tan();
        let expected = std::f64::consts::PI * r_px * r_px;
        assert!((count - expected).abs() / expected < 0.03, "{count} vs {expected}");
        let centre = obs.disparity_at(320, 240).unwrap();
        assert!((centre - cam.depth_to_disparity(0.295)).abs() < 0.5);
        assert_eq!(obs.wind_offset_truth, Vec3::zeros());
    }

    #[test]
    fn identical_inputs_render_identically() {
        let scene = lone_sphere(0.012);
        let cam = CameraModel::default();
        let pose = look_at(&Vec3::new(0.05, -0.25, 0.02), &Vec3::zeros());
        let a = render(&scene, &pose, &cam, &NoiseSpec::default(), 9);
        let b = render(&scene, &pose, &cam, &NoiseSpec::default(), 9);
        assert_eq!(a.instance_mask, b.instance_mask);
        assert_eq!(
            a.disparity.iter().map(|d| d.to_bits()).collect::<Vec<_>>(),
            b.disparity.iter().map(|d| d.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(a.wind_offset_truth, b.wind_offset_truth);
    }

    #[test]
    fn wind_is_bounded_and_seeded() {
        let noise = NoiseSpec::default();
        for s in 0..500 {
            let w = wind_offset(&noise, s);
            assert!(w.norm() <= noise.wind_translation_max_m + 1e-15);
            assert_eq!(w, wind_offset(&noise, s));
        }
    }

    #[test]
    fn labelled_pixels_have_valid_disparity() {
        let scene = lone_sphere(0.014);
        let cam = CameraModel::default();
        let pose = look_at(&Vec3::new(0.0, -0.2, 0.0), &Vec3::zeros());
        let obs = render(&scene, &pose, &cam, &NoiseSpec::default(), 4);
        for (l, d) in obs.instance_mask.iter().zip(&obs.disparity) {
            if *l != BACKGROUND {
                assert!(d.is_finite() && *d >= 0.0);
            }
        }
    }

    #[test]
    fn occluders_never_add_visible_pixels() {
        let mut scene = lone_sphere(0.012);
        let cam = CameraModel::default();
        let pose = look_at(&Vec3::new(0.0, -0.3, 0.0), &Vec3::zeros());
        let before = render(&scene, &pose, &cam, &NoiseSpec::zero(), 0).labels().len();
        let count = |o: &Observation| o.instance_mask.iter().filter(|&&l| l == 0).count();
        let a = count(&render(&scene, &pose, &cam, &NoiseSpec::zero(), 0));
        scene.occluders.push(OccluderSpec::Leaf {
            center: Vec3::new(0.004, -0.1, 0.0),
            orientation: UnitQuaternion::from_axis_angle(&Vec3::x_axis(), std::f64::consts::FRAC_PI_2),
            semi_major: 0.01,
            semi_minor: 0.004,
        });
        let b = count(&render(&scene, &pose, &cam, &NoiseSpec::zero(), 0));
        assert_eq!(before, 1);
        assert!(b < a);
    }
}
