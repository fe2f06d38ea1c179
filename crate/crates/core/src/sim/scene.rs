use nalgebra::{Unit, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::WorkspaceSpec;
use crate::geometry::point_segment_distance;
use crate::{Error, Result, Vec3};

/// One ellipsoidal fruitlet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FruitletSpec {
    pub center: Vec3,
    /// Semi-axes along the local x, y, z axes; local z is the major axis.
    pub semi_axes: Vec3,
    pub orientation: UnitQuaternion<f64>,
    pub cluster_id: u32,
    /// Unique within the scene.
    pub fruitlet_id: u32,
    /// Twice the smallest semi-axis transverse to the major axis.
    pub diameter: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub cluster_id: u32,
    pub is_target: bool,
    pub fruitlets: Vec<FruitletSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OccluderSpec {
    /// Flat elliptical leaf.
    Leaf {
        center: Vec3,
        /// Local z is the leaf normal.
        orientation: UnitQuaternion<f64>,
        semi_major: f64,
        semi_minor: f64,
    },
    /// Open cylinder between two points.
    Branch { p0: Vec3, p1: Vec3, radius: f64 },
}

/// Infinite plane behind the canopy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Backdrop {
    pub point: Vec3,
    pub normal: Vec3,
}

/// A complete synthetic scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub rng_seed: u64,
    pub clusters: Vec<ClusterSpec>,
    pub occluders: Vec<OccluderSpec>,
    pub backdrop: Option<Backdrop>,
    pub anchor_position: Vec3,
    pub workspace: WorkspaceSpec,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoliageLevel {
    None,
    Light,
    #[default]
    Medium,
    Heavy,
}

impl FoliageLevel {
    /// (leaves, branches)
    pub fn counts(self) -> (usize, usize) {
        match self {
            FoliageLevel::None => (0, 0),
            FoliageLevel::Light => (4, 1),
            FoliageLevel::Medium => (10, 2),
            FoliageLevel::Heavy => (20, 3),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneGenParams {
    pub n_clusters: usize,
    pub fruitlets_per_cluster: (usize, usize),
    pub diameter_range_m: (f64, f64),
    /// Major to transverse semi-axis ratio range.
    pub elongation: (f64, f64),
    /// Fruitlet centres lie within this distance of their cluster centre.
    pub cluster_radius: f64,
    /// Minimum clearance between fruitlet surfaces.
    pub fruitlet_gap: f64,
    pub min_cluster_separation: f64,
    /// Clusters are placed within this half-extent of the anchor in x and z.
    pub placement_extent: f64,
    /// Target cluster centre distance from the anchor.
    pub target_offset: (f64, f64),
    pub foliage: FoliageLevel,
    /// Distance of the backdrop plane behind the anchor, if any.
    pub backdrop_distance: Option<f64>,
    pub max_retries: usize,
}

impl Default for SceneGenParams {
    fn default() -> Self {
        Self {
            n_clusters: 3,
            fruitlets_per_cluster: (3, 6),
            diameter_range_m: (0.007, 0.014),
            elongation: (1.0, 1.2),
            cluster_radius: 0.016,
            fruitlet_gap: 0.001,
            min_cluster_separation: 0.10,
            placement_extent: 0.2,
            target_offset: (0.03, 0.05),
            foliage: FoliageLevel::Medium,
            backdrop_distance: Some(0.3),
            max_retries: 2000,
        }
    }
}

impl SceneGenParams {
    pub fn validate(&self) -> Result<()> {
        let (dmin, dmax) = self.diameter_range_m;
        if !(0.007 - 1e-12 <= dmin && dmin <= dmax && dmax <= 0.014 + 1e-12) {
            return Err(Error::InvalidParams(format!("fruitlet diameters [{dmin}, {dmax}] m outside [0.007, 0.014] m")));
        }
        let (nmin, nmax) = self.fruitlets_per_cluster;
        if !(3 <= nmin && nmin <= nmax && nmax <= 6) {
            return Err(Error::InvalidParams(format!("fruitlets per cluster [{nmin}, {nmax}] outside [3, 6]")));
        }
        if self.n_clusters == 0 {
            return Err(Error::InvalidParams("at least one cluster required".into()));
        }
        if !(self.elongation.0 >= 1.0 && self.elongation.0 <= self.elongation.1) {
            return Err(Error::InvalidParams("elongation range must start at 1 or above".into()));
        }
        if !(self.target_offset.0 >= 0.0 && self.target_offset.0 <= self.target_offset.1) {
            return Err(Error::InvalidParams("target offset range inverted".into()));
        }
        Ok(())
    }
}

impl FruitletSpec {
    pub fn bounding_radius(&self) -> f64 {
        self.semi_axes.max()
    }

    /// Smallest ray parameter `t > t_min` where `origin + t * dir` meets the surface.
    #[inline]
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3, t_min: f64) -> Option<f64> {
        let inv = self.orientation.inverse();
        let o = (inv * (origin - self.center)).component_div(&self.semi_axes);
        let d = (inv * dir).component_div(&self.semi_axes);
        let a = d.norm_squared();
        let b = o.dot(&d);
        let c = o.norm_squared() - 1.0;
        let disc = b * b - a * c;
        if disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        let t0 = (-b - sq) / a;
        if t0 > t_min {
            return Some(t0);
        }
        let t1 = (-b + sq) / a;
        (t1 > t_min).then_some(t1)
    }
}

impl OccluderSpec {
    pub fn bounding_sphere(&self) -> (Vec3, f64) {
        match self {
            OccluderSpec::Leaf { center, semi_major, .. } => (*center, *semi_major),
            OccluderSpec::Branch { p0, p1, radius } => ((p0 + p1) / 2.0, (p1 - p0).norm() / 2.0 + radius),
        }
    }

    #[inline]
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3, t_min: f64) -> Option<f64> {
        match self {
            OccluderSpec::Leaf {
                center,
                orientation,
                semi_major,
                semi_minor,
            } => {
                let n = orientation * Vec3::z();
                let denom = dir.dot(&n);
                if denom.abs() < 1e-15 {
                    return None;
                }
                let t = (center - origin).dot(&n) / denom;
                if t <= t_min {
                    return None;
                }
                let local = orientation.inverse() * (origin + dir * t - center);
                let e = (local.x / semi_major).powi(2) + (local.y / semi_minor).powi(2);
                (e <= 1.0).then_some(t)
            }
            OccluderSpec::Branch { p0, p1, radius } => {
                let axis = p1 - p0;
                let len = axis.norm();
                let u = axis / len;
                let w = origin - p0;
                let dp = dir - u * dir.dot(&u);
                let wp = w - u * w.dot(&u);
                let a = dp.norm_squared();
                if a < 1e-18 {
                    return None;
                }
                let b = dp.dot(&wp);
                let c = wp.norm_squared() - radius * radius;
                let disc = b * b - a * c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                for t in [(-b - sq) / a, (-b + sq) / a] {
                    if t > t_min {
                        let s = (w + dir * t).dot(&u);
                        if (0.0..=len).contains(&s) {
                            return Some(t);
                        }
                    }
                }
                None
            }
        }
    }
}

impl Backdrop {
    #[inline]
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3, t_min: f64) -> Option<f64> {
        let denom = dir.dot(&self.normal);
        if denom.abs() < 1e-15 {
            return None;
        }
        let t = (self.point - origin).dot(&self.normal) / denom;
        (t > t_min).then_some(t)
    }
}

impl SceneSpec {
    pub fn fruitlets(&self) -> impl Iterator<Item = &FruitletSpec> {
        self.clusters.iter().flat_map(|c| c.fruitlets.iter())
    }

    pub fn target_cluster(&self) -> Option<&ClusterSpec> {
        self.clusters.iter().find(|c| c.is_target)
    }

    pub fn fruitlet(&self, id: u32) -> Option<&FruitletSpec> {
        self.fruitlets().find(|f| f.fruitlet_id == id)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn with_occluders_removed(&self) -> Self {
        Self {
            occluders: Vec::new(),
            ..self.clone()
        }
    }
}

pub fn cluster_centroid(c: &ClusterSpec) -> Vec3 {
    c.fruitlets.iter().map(|f| f.center).sum::<Vec3>() / c.fruitlets.len().max(1) as f64
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

fn random_rotation(rng: &mut ChaCha8Rng) -> UnitQuaternion<f64> {
    let axis = Unit::new_normalize(random_unit(rng));
    UnitQuaternion::from_axis_angle(&axis, rng.gen_range(0.0..std::f64::consts::TAU))
}

fn place_cluster(
    rng: &mut ChaCha8Rng,
    params: &SceneGenParams,
    center: Vec3,
    cluster_id: u32,
    next_id: &mut u32,
) -> Result<Vec<FruitletSpec>> {
    let n = rng.gen_range(params.fruitlets_per_cluster.0..=params.fruitlets_per_cluster.1);
    let mut out: Vec<FruitletSpec> = Vec::with_capacity(n);
    let mut tries = 0;
    while out.len() < n {
        tries += 1;
        if tries > params.max_retries {
            return Err(Error::PlacementInfeasible {
                what: "fruitlets within cluster radius",
                retries: params.max_retries,
            });
        }
        let d = rng.gen_range(params.diameter_range_m.0..=params.diameter_range_m.1);
        let e = rng.gen_range(params.elongation.0..=params.elongation.1);
        let semi_axes = Vec3::new(d / 2.0, d / 2.0, d / 2.0 * e);
        let offset = random_unit(rng) * params.cluster_radius * rng.gen::<f64>().cbrt();
        let c = center + offset;
        let r = semi_axes.max();
        if out
            .iter()
            .any(|f| (f.center - c).norm() < f.bounding_radius() + r + params.fruitlet_gap)
        {
            continue;
        }
        out.push(FruitletSpec {
            center: c,
            semi_axes,
            orientation: random_rotation(rng),
            cluster_id,
            fruitlet_id: *next_id,
            diameter: d,
        });
        *next_id += 1;
    }
    Ok(out)
}

fn clear_of_fruit(fruit: &[FruitletSpec], distance_to: impl Fn(&Vec3) -> f64, pad: f64) -> bool {
    fruit.iter().all(|f| distance_to(&f.center) > f.bounding_radius() + pad)
}

/// Procedural scene; deterministic in `seed`.
///
/// The anchor sits at the origin with the canopy spread over the x-z plane
/// and cameras approaching from -y.
pub fn generate_scene(params: &SceneGenParams, seed: u64) -> Result<SceneSpec> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let anchor = Vec3::zeros();
    let mut centers: Vec<Vec3> = Vec::with_capacity(params.n_clusters);
    let phi = rng.gen_range(0.0..std::f64::consts::TAU);
    let r = rng.gen_range(params.target_offset.0..=params.target_offset.1);
    let target_center = anchor + Vec3::new(r * phi.cos(), rng.gen_range(0.0..0.01), r * phi.sin());
    centers.push(target_center);
    let mut tries = 0;
    while centers.len() < params.n_clusters {
        tries += 1;
        if tries > params.max_retries {
            return Err(Error::PlacementInfeasible {
                what: "cluster centres at the requested separation",
                retries: params.max_retries,
            });
        }
        let ext = params.placement_extent;
        let c = anchor
            + Vec3::new(rng.gen_range(-ext..ext), rng.gen_range(-0.02..0.04), rng.gen_range(-ext..ext));
        let sep_ok = centers.iter().all(|o| (o - c).norm() >= params.min_cluster_separation);
        let farther = (c - anchor).norm() > (target_center - anchor).norm() + 2.0 * params.cluster_radius;
        if sep_ok && farther {
            centers.push(c);
        }
    }
    let mut next_id = 0;
    let mut clusters = Vec::with_capacity(centers.len());
    for (i, c) in centers.iter().enumerate() {
        let fruitlets = place_cluster(&mut rng, params, *c, i as u32, &mut next_id)?;
        clusters.push(ClusterSpec {
            cluster_id: i as u32,
            is_target: false,
            fruitlets,
        });
    }
    let target = clusters
        .iter()
        .enumerate()
        .map(|(i, c)| (i, (cluster_centroid(c) - anchor).norm()))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
        .0;
    clusters[target].is_target = true;

    let all_fruit: Vec<FruitletSpec> = clusters.iter().flat_map(|c| c.fruitlets.iter().cloned()).collect();
    let (n_leaves, n_branches) = params.foliage.counts();
    let mut occluders = Vec::with_capacity(n_leaves + n_branches);
    let mut tries = 0;
    while occluders.len() < n_leaves {
        tries += 1;
        if tries > params.max_retries {
            return Err(Error::PlacementInfeasible {
                what: "leaves clear of fruitlets",
                retries: params.max_retries,
            });
        }
        let center = anchor
            + Vec3::new(rng.gen_range(-0.25..0.25), rng.gen_range(-0.12..0.06), rng.gen_range(-0.25..0.25));
        let orientation = random_rotation(&mut rng);
        let semi_major = rng.gen_range(0.025..0.045);
        let semi_minor = semi_major * rng.gen_range(0.35..0.55);
        let normal = orientation * Vec3::z();
        // distance from a point to the leaf, bounding the ellipse by its major circle
        let dist = |p: &Vec3| {
            let v = p - center;
            let h = v.dot(&normal);
            let radial = (v - normal * h).norm();
            (h * h + (radial - semi_major).max(0.0).powi(2)).sqrt()
        };
        if clear_of_fruit(&all_fruit, dist, 0.002) {
            occluders.push(OccluderSpec::Leaf {
                center,
                orientation,
                semi_major,
                semi_minor,
            });
        }
    }
    let mut tries = 0;
    while occluders.len() < n_leaves + n_branches {
        tries += 1;
        if tries > params.max_retries {
            return Err(Error::PlacementInfeasible {
                what: "branches clear of fruitlets",
                retries: params.max_retries,
            });
        }
        let mid = anchor
            + Vec3::new(rng.gen_range(-0.2..0.2), rng.gen_range(0.0..0.08), rng.gen_range(-0.2..0.2));
        let dir = random_unit(&mut rng);
        let half = rng.gen_range(0.1..0.2);
        let radius = rng.gen_range(0.004..0.008);
        let (p0, p1) = (mid - dir * half, mid + dir * half);
        if clear_of_fruit(&all_fruit, |p| point_segment_distance(p, &p0, &p1), radius + 0.002) {
            occluders.push(OccluderSpec::Branch { p0, p1, radius });
        }
    }
    let backdrop = params.backdrop_distance.map(|d| Backdrop {
        point: anchor + Vec3::new(0.0, d, 0.0),
        normal: Vec3::y(),
    });
    let target_centroid = cluster_centroid(&clusters[target]);
    Ok(SceneSpec {
        rng_seed: seed,
        clusters,
        occluders,
        backdrop,
        anchor_position: anchor,
        workspace: WorkspaceSpec::default_shell(&target_centroid),
    })
}
