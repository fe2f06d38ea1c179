//! Independent reference implementations shared by the integration and
//! acceptance tests.

#![allow(dead_code)]

use fruitlet_nbv::attention::AttentionRegion;
use fruitlet_nbv::map::{DualMap, DualMapConfig, MapKind, MapLayout, OccupancyState, VoxelKey};
use fruitlet_nbv::planner::GainMode;
use fruitlet_nbv::sim::LabeledPoint;
use fruitlet_nbv::sizing::PixelMask;
use fruitlet_nbv::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------- voxels

/// Parameter interval `[lo, hi)` the ray spends inside voxel `k`, by slab
/// intersection. `None` when the ray misses the voxel.
pub fn slab_interval(origin: &Vec3, dir: &Vec3, res: f64, k: &VoxelKey) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for (a, ka) in [k.x, k.y, k.z].into_iter().enumerate() {
        let (o, d) = (origin[a], dir[a]);
        let (p0, p1) = (ka as f64 * res, (ka + 1) as f64 * res);
        if d == 0.0 {
            if !((o / res).floor() as i32 == ka) {
                return None;
            }
            continue;
        }
        let (t0, t1) = ((p0 - o) / d, (p1 - o) / d);
        let (t0, t1) = if d > 0.0 { (t0, t1) } else { (t1, t0) };
        lo = lo.max(t0);
        hi = hi.min(t1);
    }
    (hi > lo).then_some((lo, hi))
}

/// Every voxel of size `res` the segment `t in [t0, t1]` passes through with
/// positive length, ordered along the ray, with its slab interval.
///
/// Candidates come from per-slice bounding boxes along the dominant axis
/// (padded by one voxel); membership is decided by the slab test alone.
pub fn enumerate_voxels(origin: &Vec3, dir: &Vec3, res: f64, t0: f64, t1: f64) -> Vec<(VoxelKey, f64, f64)> {
    if !(t1 > t0) {
        return Vec::new();
    }
    let m = (0..3).max_by(|&a, &b| dir[a].abs().total_cmp(&dir[b].abs())).unwrap();
    let p = |t: f64| origin + dir * t;
    let idx = |x: f64| (x / res).floor() as i32;
    let (a0, a1) = (idx(p(t0)[m]), idx(p(t1)[m]));
    let mut out = Vec::new();
    for km in a0.min(a1) - 1..=a0.max(a1) + 1 {
        let (s0, s1) = ((km as f64 * res - origin[m]) / dir[m], ((km + 1) as f64 * res - origin[m]) / dir[m]);
        let (lo, hi) = (s0.min(s1).max(t0), s0.max(s1).min(t1));
        if lo > hi {
            continue;
        }
        let (q0, q1) = (p(lo), p(hi));
        let range = |a: usize| idx(q0[a].min(q1[a])) - 1..=idx(q0[a].max(q1[a])) + 1;
        let others: Vec<usize> = (0..3).filter(|&a| a != m).collect();
        for i in range(others[0]) {
            for j in range(others[1]) {
                let mut c = [0; 3];
                c[m] = km;
                c[others[0]] = i;
                c[others[1]] = j;
                let key = VoxelKey::new(c[0], c[1], c[2]);
                if let Some((lo, hi)) = slab_interval(origin, dir, res, &key) {
                    if hi > t0 && lo < t1 {
                        out.push((key, lo, hi));
                    }
                }
            }
        }
    }
    out.sort_by(|a, b| a.1.total_cmp(&b.1));
    out.dedup_by_key(|v| v.0);
    out
}

/// Independent ray/ball intersection by the textbook quadratic.
pub fn ball_interval(origin: &Vec3, dir: &Vec3, centre: &Vec3, radius: f64) -> Option<(f64, f64)> {
    let f = origin - centre;
    let a = dir.dot(dir);
    let b = 2.0 * f.dot(dir);
    let c = f.dot(&f) - radius * radius;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    Some(((-b - s) / (2.0 * a), (-b + s) / (2.0 * a)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefVoxel {
    pub key: VoxelKey,
    pub map: MapKind,
    pub in_attention: bool,
    pub state: OccupancyState,
}

fn owner(layout: MapLayout, inside: bool) -> MapKind {
    match (layout, inside) {
        (MapLayout::SingleCoarse, _) => MapKind::Coarse,
        (MapLayout::SingleFine, _) => MapKind::Fine,
        (MapLayout::Dual, true) => MapKind::Fine,
        (MapLayout::Dual, false) => MapKind::Coarse,
    }
}

/// Reference hybrid ray walk up to `t_end`: coarse voxels outside the
/// attention interval, fine voxels inside it, truncated after the first
/// occupied voxel.
pub fn reference_walk(map: &DualMap, origin: &Vec3, dir: &Vec3, t_end: f64) -> Vec<RefVoxel> {
    let layout = map.config().layout;
    let att = map.attention();
    let clip = ball_interval(origin, dir, &att.center, att.radius)
        .map(|(a, b)| (a.max(0.0), b.min(t_end)))
        .filter(|(a, b)| a <= b);
    let mut segs: Vec<(f64, f64, MapKind, bool)> = Vec::new();
    match (clip, layout) {
        (None, _) => segs.push((0.0, t_end, owner(layout, false), false)),
        (Some((a, b)), MapLayout::Dual) => {
            if a > 0.0 {
                segs.push((0.0, a, MapKind::Coarse, false));
            }
            segs.push((a, b, MapKind::Fine, true));
            if b < t_end {
                segs.push((b, t_end, MapKind::Coarse, false));
            }
        }
        (Some(_), _) => segs.push((0.0, t_end, owner(layout, false), false)),
    }
    let mut out = Vec::new();
    for (t0, t1, kind, seg_in) in segs {
        let m = map.map(kind);
        for (key, lo, hi) in enumerate_voxels(origin, dir, m.resolution(), t0, t1) {
            let in_attention = match (layout, clip) {
                (MapLayout::Dual, _) => seg_in,
                (_, Some((a, b))) => hi.min(t_end) >= a && lo.max(0.0) <= b,
                (_, None) => false,
            };
            let state = m.state(&key);
            out.push(RefVoxel { key, map: kind, in_attention, state });
            if state == OccupancyState::Occupied {
                return out;
            }
        }
    }
    out
}

/// Reference per-ray gain: unknown fraction of the counted voxels.
pub fn reference_ray_gain(map: &DualMap, origin: &Vec3, dir: &Vec3, max_range: f64, mode: GainMode) -> f64 {
    let t_end = match mode {
        GainMode::Unobserved => max_range,
        GainMode::Attention => {
            let att = map.attention();
            match ball_interval(origin, dir, &att.center, att.radius) {
                Some((a, b)) if b >= 0.0 && a <= b.min(max_range) => b.min(max_range),
                _ => return 0.0,
            }
        }
    };
    let walk = reference_walk(map, origin, dir, t_end);
    let counted: Vec<&RefVoxel> = walk
        .iter()
        .filter(|v| mode == GainMode::Unobserved || v.in_attention)
        .collect();
    if counted.is_empty() {
        return 0.0;
    }
    counted.iter().filter(|v| v.state == OccupancyState::Unknown).count() as f64 / counted.len() as f64
}

/// Whether a ray meets the attention ball within `[0, max_range]`.
pub fn ray_meets_ball(att: &AttentionRegion, origin: &Vec3, dir: &Vec3, max_range: f64) -> bool {
    matches!(ball_interval(origin, dir, &att.center, att.radius), Some((a, b)) if b >= 0.0 && a <= max_range)
}

// ---------------------------------------------------------------- maps

pub fn unit_vector(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn in_ball(rng: &mut ChaCha8Rng, centre: &Vec3, radius: f64) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if v.norm() <= 1.0 {
            return centre + v * radius;
        }
    }
}

/// Random cloud seen from `origin`: a blob of labelled points near the
/// attention centre, a few stray hits and some beyond-range returns.
pub fn random_cloud(rng: &mut ChaCha8Rng, att: &AttentionRegion, origin: &Vec3, max_range: f64) -> Vec<LabeledPoint> {
    let n = rng.gen_range(20..200);
    (0..n)
        .map(|_| match rng.gen_range(0..10) {
            0..=5 => LabeledPoint {
                position: in_ball(rng, &att.center, att.radius * 1.2),
                label: rng.gen_bool(0.7).then_some(rng.gen_range(0..5)),
            },
            6..=8 => LabeledPoint {
                position: in_ball(rng, &att.center, 0.3),
                label: None,
            },
            _ => LabeledPoint {
                position: origin + unit_vector(rng) * (max_range * rng.gen_range(1.05..1.5)),
                label: None,
            },
        })
        .collect()
}

/// Sensor origin on a sphere of random radius around `centre`.
pub fn random_origin(rng: &mut ChaCha8Rng, centre: &Vec3) -> Vec3 {
    centre + unit_vector(rng) * rng.gen_range(0.12..0.45)
}

/// A map with a random attention ball and a few random insertions.
pub fn random_map(rng: &mut ChaCha8Rng, layout: MapLayout) -> DualMap {
    let centre = Vec3::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
    let att = AttentionRegion::new(centre, rng.gen_range(0.03..0.06));
    let cfg = DualMapConfig {
        layout,
        ..Default::default()
    };
    let mut map = DualMap::new(cfg, att);
    for _ in 0..rng.gen_range(0..5) {
        let o = random_origin(rng, &att.center);
        let cloud = random_cloud(rng, &att, &o, map.config().max_range);
        map.insert_cloud(&cloud, &o);
    }
    map
}

// ---------------------------------------------------------------- graphs

/// Cut size of `side` over `edges` restricted to `nodes`.
fn cut_value(edges: &[(usize, usize)], side: &[bool]) -> usize {
    edges.iter().filter(|&&(a, b)| side[a] != side[b]).count()
}

fn components(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut label: Vec<usize> = (0..n).collect();
    // repeated relaxation to the smallest reachable index
    loop {
        let mut changed = false;
        for &(a, b) in edges {
            let m = label[a].min(label[b]);
            if label[a] != m || label[b] != m {
                label[a] = m;
                label[b] = m;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut out: Vec<Vec<usize>> = Vec::new();
    for root in 0..n {
        let c: Vec<usize> = (0..n).filter(|&v| label[v] == root).collect();
        if !c.is_empty() {
            out.push(c);
        }
    }
    out
}

/// Global minimum cut of a connected graph on `0..n` by enumerating every
/// bipartition. Returns the value and the canonical side: with vertex 0 on
/// the source side, the first sink `t` (ascending) separated by some
/// minimum cut, and the intersection of all such source sides.
pub fn brute_min_cut(n: usize, edges: &[(usize, usize)]) -> (usize, Vec<bool>) {
    assert!(n >= 2 && n <= 16);
    let mut cuts: Vec<(usize, u32)> = Vec::new();
    for mask in 0u32..(1 << n) {
        if mask & 1 == 0 || mask == (1 << n) - 1 {
            continue;
        }
        let side: Vec<bool> = (0..n).map(|v| mask >> v & 1 == 1).collect();
        cuts.push((cut_value(edges, &side), mask));
    }
    let best = cuts.iter().map(|c| c.0).min().unwrap();
    for t in 1..n {
        let sides: Vec<u32> = cuts
            .iter()
            .filter(|&&(v, m)| v == best && m >> t & 1 == 0)
            .map(|c| c.1)
            .collect();
        if let Some(first) = sides.first() {
            let s = sides.iter().fold(*first, |acc, m| acc & m);
            return (best, (0..n).map(|v| s >> v & 1 == 1).collect());
        }
    }
    unreachable!("some cut separates vertex 0 from another vertex")
}

/// Highly connected subgraph clustering by exhaustive minimum cuts.
/// Two-node components are kept; singletons are dropped.
pub fn brute_hcs(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    brute_hcs_rec(&(0..n).collect::<Vec<_>>(), edges, &mut out);
    out.sort();
    out
}

fn brute_hcs_rec(nodes: &[usize], edges: &[(usize, usize)], out: &mut Vec<Vec<usize>>) {
    let pos = |g: usize| nodes.iter().position(|&v| v == g).unwrap();
    let local: Vec<(usize, usize)> = edges.iter().map(|&(a, b)| (pos(a), pos(b))).collect();
    for comp in components(nodes.len(), &local) {
        let members: Vec<usize> = comp.iter().map(|&v| nodes[v]).collect();
        match members.len() {
            1 => continue,
            2 => {
                out.push(members);
                continue;
            }
            _ => {}
        }
        let cpos = |g: usize| members.iter().position(|&v| v == g);
        let ce: Vec<(usize, usize)> = edges
            .iter()
            .filter_map(|&(a, b)| Some((cpos(a)?, cpos(b)?)))
            .collect();
        let (value, side) = brute_min_cut(members.len(), &ce);
        if 2 * value > members.len() {
            out.push(members);
            continue;
        }
        let kept: Vec<(usize, usize)> = ce
            .iter()
            .filter(|&&(a, b)| side[a] == side[b])
            .map(|&(a, b)| (members[a], members[b]))
            .collect();
        brute_hcs_rec(&members, &kept, out);
    }
}

/// Minimum cut value of the subgraph induced by `cluster`.
pub fn induced_min_cut(cluster: &[usize], edges: &[(usize, usize)]) -> usize {
    let pos = |g: usize| cluster.iter().position(|&v| v == g);
    let ce: Vec<(usize, usize)> = edges.iter().filter_map(|&(a, b)| Some((pos(a)?, pos(b)?))).collect();
    brute_min_cut(cluster.len(), &ce).0
}

pub fn random_graph(rng: &mut ChaCha8Rng, max_nodes: usize) -> (usize, Vec<(usize, usize)>) {
    let n = rng.gen_range(1..=max_nodes);
    let p = rng.gen_range(0.15..0.95);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(p) {
                edges.push((a, b));
            }
        }
    }
    (n, edges)
}

pub fn complete(offset: usize, n: usize) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            e.push((offset + a, offset + b));
        }
    }
    e
}

// ---------------------------------------------------------------- images

/// Pixels whose centres lie inside the ellipse with full axes
/// `major x minor`, rotated by `theta`.
pub fn raster_ellipse(cx: f64, cy: f64, major: f64, minor: f64, theta: f64, w: usize, h: usize) -> PixelMask {
    let (a, b) = (major / 2.0, minor / 2.0);
    let (c, s) = (theta.cos(), theta.sin());
    let mut px = Vec::new();
    for v in 0..h {
        for u in 0..w {
            let (dx, dy) = (u as f64 - cx, v as f64 - cy);
            let x = dx * c + dy * s;
            let y = -dx * s + dy * c;
            if (x / a).powi(2) + (y / b).powi(2) <= 1.0 {
                px.push((v * w + u) as u32);
            }
        }
    }
    PixelMask::from_indices(w, h, &px)
}

// ---------------------------------------------------------------- registration

pub struct RegistrationInstance {
    pub frames: Vec<Vec<Vec3>>,
    /// True (shifted, noise-free) positions of each frame's real detections.
    pub inliers: Vec<Vec<Vec3>>,
    /// Per-frame scene shift.
    pub wind: Vec<Vec3>,
    pub centre: Vec3,
}

/// How per-frame wind offsets are drawn.
#[derive(Clone, Copy, Debug)]
pub enum WindModel {
    /// The simulator's wind: random direction, magnitude around the typical
    /// value, clamped to the maximum.
    Simulator(fruitlet_nbv::sim::NoiseSpec),
    /// Random direction, magnitude uniform in `[0, max]`.
    Uniform(f64),
}

impl WindModel {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec3 {
        match self {
            WindModel::Simulator(noise) => fruitlet_nbv::sim::wind_offset(noise, rng.gen()),
            WindModel::Uniform(max) => unit_vector(rng) * rng.gen_range(0.0..=*max),
        }
    }
}

/// A fruitlet cluster seen over several frames, each shifted by wind, with
/// centroid noise `sigma` and `spurious` of all detections placed at
/// random.
pub fn registration_instance(rng: &mut ChaCha8Rng, wind: WindModel, sigma: f64, spurious: f64) -> RegistrationInstance {
    let n_fruit = rng.gen_range(3..=6);
    let mut fruit: Vec<(Vec3, f64)> = Vec::new();
    while fruit.len() < n_fruit {
        let c = in_ball(rng, &Vec3::zeros(), 0.016);
        let d = rng.gen_range(0.007..0.014);
        if fruit.iter().all(|(o, od)| (o - c).norm() >= (d + od) / 2.0 + 0.001) {
            fruit.push((c, d));
        }
    }
    let normal = rand_distr::Normal::new(0.0, sigma.max(1e-300)).unwrap();
    let noise = |rng: &mut ChaCha8Rng| {
        if sigma == 0.0 {
            Vec3::zeros()
        } else {
            Vec3::new(rng.sample(normal), rng.sample(normal), rng.sample(normal))
        }
    };
    let n_frames = rng.gen_range(5..=10);
    let mut frames = Vec::new();
    let mut inliers = Vec::new();
    let mut winds = Vec::new();
    for _ in 0..n_frames {
        let w = wind.sample(rng);
        // at least three real detections per frame: with one or two, a
        // slide by one fruitlet spacing fits as well as the truth
        let seen: Vec<bool> = loop {
            let v: Vec<bool> = fruit.iter().map(|_| rng.gen_bool(0.85)).collect();
            if v.iter().filter(|&&x| x).count() >= 3 {
                break v;
            }
        };
        let mut dets: Vec<Vec3> = Vec::new();
        let mut clean: Vec<Vec3> = Vec::new();
        for ((c, _), _) in fruit.iter().zip(&seen).filter(|(_, &s)| s) {
            dets.push(c + w + noise(rng));
            clean.push(c + w);
        }
        inliers.push(clean);
        // spurious share of the final list
        let n_spur = ((dets.len() as f64) * spurious / (1.0 - spurious)).round() as usize;
        for _ in 0..n_spur {
            let p = Vec3::new(rng.gen_range(-0.03..0.03), rng.gen_range(-0.03..0.03), rng.gen_range(-0.03..0.03));
            let k = rng.gen_range(0..=dets.len());
            dets.insert(k, p);
        }
        frames.push(dets);
        winds.push(w);
    }
    let centre = fruit.iter().map(|f| f.0).sum::<Vec3>() / fruit.len() as f64;
    RegistrationInstance {
        frames,
        inliers,
        wind: winds,
        centre,
    }
}

// ---------------------------------------------------------------- dual map

pub struct EquivalenceOutcome {
    pub checked: usize,
    pub mismatches: usize,
}

/// Feeds one random insertion sequence to a dual map and a single fine map
/// and compares tri-state and ROI flags on every fine voxel lying wholly
/// inside the attention ball.
pub fn dual_vs_fine(rng: &mut ChaCha8Rng) -> EquivalenceOutcome {
    let centre = Vec3::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
    let att = AttentionRegion::new(centre, rng.gen_range(0.03..0.06));
    let mk = |layout| {
        DualMap::new(
            DualMapConfig {
                layout,
                ..Default::default()
            },
            att,
        )
    };
    let (mut dual, mut fine) = (mk(MapLayout::Dual), mk(MapLayout::SingleFine));
    for _ in 0..rng.gen_range(1..=8) {
        let o = if rng.gen_bool(0.1) {
            in_ball(rng, &att.center, att.radius * 0.8)
        } else {
            random_origin(rng, &att.center)
        };
        let cloud = random_cloud(rng, &att, &o, dual.config().max_range);
        dual.insert_cloud(&cloud, &o);
        fine.insert_cloud(&cloud, &o);
    }
    let res = fine.fine().resolution();
    let wholly_inside = |k: &VoxelKey| {
        let c0 = k.min_corner(res);
        (0..8).all(|i| {
            let c = c0 + Vec3::new((i & 1) as f64, (i >> 1 & 1) as f64, (i >> 2 & 1) as f64) * res;
            (c - att.center).norm() < att.radius - 1e-9
        })
    };
    let mut keys: Vec<VoxelKey> = dual.fine().iter().chain(fine.fine().iter()).map(|(k, _)| *k).collect();
    keys.sort();
    keys.dedup();
    let mut out = EquivalenceOutcome { checked: 0, mismatches: 0 };
    for k in keys.iter().filter(|k| wholly_inside(k)) {
        out.checked += 1;
        let (a, b) = (dual.fine(), fine.fine());
        if a.state(k) != b.state(k) || a.is_roi(k) != b.is_roi(k) {
            out.mismatches += 1;
        }
    }
    out
}

/// Ray-cast cost benchmark on an empty 1 m cube with a 6 cm attention ball
/// at its centre. Rays start on the cube surface and run to where they
/// leave it; half aim through the ball, half at uniform points. Rays with
/// more than 20% of their length inside the ball are skipped.
pub struct VisitBenchmark {
    pub rays: usize,
    pub mean_dual: f64,
    pub mean_fine: f64,
    /// Means over the rays that cross the ball.
    pub crossing_rays: usize,
    pub crossing_dual: f64,
    pub crossing_fine: f64,
}

fn exit_distance(o: &Vec3, d: &Vec3, half: f64) -> f64 {
    (0..3)
        .filter(|&a| d[a] != 0.0)
        .map(|a| ((half * d[a].signum()) - o[a]) / d[a])
        .fold(f64::INFINITY, f64::min)
}

pub fn visit_benchmark(rng: &mut ChaCha8Rng, n_rays: usize) -> VisitBenchmark {
    let att = AttentionRegion::new(Vec3::zeros(), 0.06);
    let mk = |layout| {
        DualMap::new(
            DualMapConfig {
                layout,
                coarse_res: 0.01,
                fine_res: 0.003,
                max_range: 2.0,
                ..Default::default()
            },
            att,
        )
    };
    let (dual, fine) = (mk(MapLayout::Dual), mk(MapLayout::SingleFine));
    let half = 0.5;
    let (mut sd, mut sf, mut n) = (0usize, 0usize, 0usize);
    let (mut cd, mut cf, mut cn) = (0usize, 0usize, 0usize);
    while n < n_rays {
        let face = rng.gen_range(0..6);
        let mut o = Vec3::new(rng.gen_range(-half..half), rng.gen_range(-half..half), rng.gen_range(-half..half));
        o[face / 2] = if face % 2 == 0 { -half } else { half };
        let target = if n % 2 == 0 {
            in_ball(rng, &att.center, att.radius)
        } else {
            Vec3::new(rng.gen_range(-half..half), rng.gen_range(-half..half), rng.gen_range(-half..half))
        };
        let Some(dir) = (target - o).try_normalize(1e-9) else { continue };
        let len = exit_distance(&o, &dir, half);
        if !(len > 0.05) {
            continue;
        }
        let inside = ball_interval(&o, &dir, &att.center, att.radius)
            .map(|(a, b)| (b.min(len) - a.max(0.0)).max(0.0))
            .unwrap_or(0.0);
        if inside > 0.2 * len {
            continue;
        }
        let count = |m: &DualMap| {
            let mut c = 0;
            m.walk_ray(&o, &dir, len, |_| {
                c += 1;
                true
            });
            c
        };
        let (a, b) = (count(&dual), count(&fine));
        sd += a;
        sf += b;
        n += 1;
        if inside > 0.0 {
            cd += a;
            cf += b;
            cn += 1;
        }
    }
    VisitBenchmark {
        rays: n,
        mean_dual: sd as f64 / n as f64,
        mean_fine: sf as f64 / n as f64,
        crossing_rays: cn,
        crossing_dual: cd as f64 / cn.max(1) as f64,
        crossing_fine: cf as f64 / cn.max(1) as f64,
    }
}

// ---------------------------------------------------------------- gain

pub struct GainCase {
    pub map: DualMap,
    pub viewpoint: fruitlet_nbv::planner::Viewpoint,
    pub mode: GainMode,
}

/// Random map and viewpoint; about a quarter of the cameras look away from
/// the attention ball.
pub fn gain_case(rng: &mut ChaCha8Rng) -> GainCase {
    let layout = if rng.gen_bool(0.7) {
        MapLayout::Dual
    } else {
        [MapLayout::SingleCoarse, MapLayout::SingleFine][rng.gen_range(0..2)]
    };
    let map = random_map(rng, layout);
    let att = *map.attention();
    let position = random_origin(rng, &att.center);
    let target = if rng.gen_bool(0.25) {
        position + (position - att.center).normalize() * 0.2 + unit_vector(rng) * 0.05
    } else {
        in_ball(rng, &att.center, att.radius * 2.0)
    };
    let mode = if rng.gen_bool(0.8) { GainMode::Attention } else { GainMode::Unobserved };
    GainCase {
        map,
        viewpoint: fruitlet_nbv::planner::Viewpoint::new(0, position, target),
        mode,
    }
}

/// Mean reference ray gain over the grid and whether any ray meets the
/// attention ball.
pub fn reference_gain(case: &GainCase, rays: &fruitlet_nbv::planner::RayGrid, max_range: f64) -> (f64, bool) {
    let dirs = rays.world_dirs(&case.viewpoint);
    let o = case.viewpoint.position;
    let sum: f64 = dirs
        .iter()
        .map(|d| reference_ray_gain(&case.map, &o, d, max_range, case.mode))
        .sum();
    let meets = dirs.iter().any(|d| ray_meets_ball(case.map.attention(), &o, d, max_range));
    (sum / dirs.len() as f64, meets)
}

/// Largest relative error between the solver gradient and central finite
/// differences of the objective, over random parameter points of one
/// instance.
pub fn gradient_relative_error(rng: &mut ChaCha8Rng) -> f64 {
    use fruitlet_nbv::sizing::{objective_gradient, RegistrationParams};
    let inst = registration_instance(rng, WindModel::Uniform(0.01), 0.0003, 0.2);
    let params = RegistrationParams::default();
    let n = 6 * (inst.frames.len() - 1);
    let x: Vec<f64> = (0..n)
        .map(|i| if i % 6 < 3 { rng.gen_range(-0.1..0.1) } else { rng.gen_range(-0.01..0.01) })
        .collect();
    let scale = params.loss_scale * [1.0, 2.0, 8.0][rng.gen_range(0..3)];
    let (_, g) = objective_gradient(&inst.frames, &x, &params, scale);
    let h = 1e-7;
    let fd: Vec<f64> = (0..n)
        .map(|i| {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[i] += h;
            xm[i] -= h;
            (objective_gradient(&inst.frames, &xp, &params, scale).0 - objective_gradient(&inst.frames, &xm, &params, scale).0)
                / (2.0 * h)
        })
        .collect();
    let diff: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
    diff / norm
}

/// RMS per-frame translation error after removing the common offset (the
/// absolute gauge is not observable from relative data). Evaluated at the
/// centroid of each frame's real detections, since rotations are barely
/// constrained by a handful of points.
pub fn registration_rms_error(inst: &RegistrationInstance, t: &fruitlet_nbv::sizing::FrameTransformSet) -> f64 {
    let n = inst.frames.len();
    let err: Vec<Vec3> = (0..n)
        .map(|f| {
            let truth = inst.wind[0] - inst.wind[f];
            let at = inst.inliers[f].iter().sum::<Vec3>() / inst.inliers[f].len() as f64;
            t.displacement_at(f, &at) - truth
        })
        .collect();
    let mean = err.iter().sum::<Vec3>() / n as f64;
    (err.iter().map(|e| (e - mean).norm_squared()).sum::<f64>() / n as f64).sqrt()
}

/// RMS of [`registration_rms_error`] over 30 generated instances.
pub fn pooled_registration_error(wind: WindModel, sigma: f64, spurious: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sq: f64 = (0..30)
        .map(|_| {
            let inst = registration_instance(&mut rng, wind, sigma, spurious);
            registration_rms_error(&inst, &fruitlet_nbv::sizing::register_global(&inst.frames, &Default::default())).powi(2)
        })
        .sum();
    (sq / 30.0).sqrt()
}
