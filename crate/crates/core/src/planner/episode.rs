use std::io::{BufRead, Write};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gain::{information_gain_counted, utility, RayGrid};
use super::heap::{next_best_view, UtilityHeap};
use super::sampling::{fibonacci_hemisphere, random_hemisphere_direction, sample_viewpoints, select_targets, workspace_pole};
use super::{Budget, PlannerConfig, ViewSampler, Viewpoint};
use crate::attention::{extract_attention, AttentionConfig, AttentionRegion, WorkspaceSpec};
use crate::geometry::look_at;
use crate::map::{roi_frontier_voxels, DualMap, DualMapConfig};
use crate::sim::{
    cloud_to_world, extract_roi_cloud, frame_seed, render, CameraModel, DepthFilterParams, NoiseSpec, Observation,
    SceneSpec,
};
use crate::sizing::{detections_from_observation, Detection, DetectionParams};
use crate::{Error, Result, Vec3};

/// Everything one planning episode needs besides the scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub camera: CameraModel,
    pub noise: NoiseSpec,
    pub depth_filter: DepthFilterParams,
    pub attention: AttentionConfig,
    pub map: DualMapConfig,
    pub planner: PlannerConfig,
    pub detection: DetectionParams,
    /// Distance of the first pose from the anchor, toward the workspace.
    pub initial_standoff: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            camera: CameraModel::default(),
            noise: NoiseSpec::default(),
            depth_filter: DepthFilterParams {
                stride: 3,
                ..Default::default()
            },
            attention: AttentionConfig::default(),
            map: DualMapConfig::default(),
            planner: PlannerConfig::default(),
            detection: DetectionParams::default(),
            initial_standoff: 0.3,
        }
    }
}

/// One line of the planning log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanningRecord {
    pub iteration: u32,
    pub position: Vec3,
    /// Camera orientation quaternion `[x, y, z, w]`.
    pub orientation: [f64; 4],
    pub target: Vec3,
    pub ig: Option<f64>,
    pub cost: Option<f64>,
    pub utility: Option<f64>,
    pub candidates: usize,
    pub heap_size: usize,
    pub frontiers: usize,
    pub voxel_visits: usize,
    pub evaluation_s: f64,
    pub motion_s: f64,
    pub elapsed_budget_s: f64,
    /// Map hash after integrating this pose's observation.
    pub map_hash: String,
    /// Evaluation only; never read by the planner.
    pub wind_offset_truth: Vec3,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanningLog {
    pub records: Vec<PlanningRecord>,
}

impl PlanningLog {
    /// One JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut records = Vec::new();
        for line in r.lines() {
            let line = line?;
            if !line.trim().is_empty() {
                records.push(serde_json::from_str(&line)?);
            }
        }
        Ok(Self { records })
    }

    /// Sum of evaluation and motion charges.
    pub fn total_charge(&self) -> f64 {
        self.records.iter().map(|r| r.evaluation_s + r.motion_s).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    BudgetExhausted,
    NoFeasibleViewpoint,
}

/// Result of one planning episode.
#[derive(Clone, Debug)]
pub struct Episode {
    pub log: PlanningLog,
    pub observations: Vec<Observation>,
    /// Per-frame detections, frame order.
    pub detections: Vec<Vec<Detection>>,
    pub attention: AttentionRegion,
    pub map: DualMap,
    pub stop: StopReason,
}

struct Round {
    choice: Option<Viewpoint>,
    visits: usize,
    candidates: usize,
    heap_size: usize,
    frontiers: usize,
}

impl Round {
    fn naive(choice: Option<Viewpoint>) -> Self {
        Self {
            choice,
            visits: 0,
            candidates: 0,
            heap_size: 0,
            frontiers: 0,
        }
    }
}

fn score(map: &DualMap, cands: &mut [Viewpoint], rays: &RayGrid, cfg: &PlannerConfig, current: &Vec3) -> usize {
    cands
        .par_iter_mut()
        .map(|vp| {
            let (ig, visits) = information_gain_counted(map, vp, rays, cfg.max_ray_range, cfg.gain);
            vp.ig = ig;
            vp.cost = (vp.position - current).norm();
            vp.utility = utility(ig, &vp.position, current, cfg.alpha);
            visits
        })
        .sum()
}

fn frontier_round(map: &DualMap, cfg: &PlannerConfig, rays: &RayGrid, ws: &WorkspaceSpec, current: &Vec3) -> Round {
    let frontiers = roi_frontier_voxels(map);
    let primary = select_targets(map, &frontiers, cfg.max_targets);
    let mut round = Round::naive(None);
    round.frontiers = frontiers.len();
    // without a usable frontier, aim at the attention centre
    for targets in [primary, vec![map.attention().center]] {
        if targets.is_empty() {
            continue;
        }
        let mut cands = sample_viewpoints(&targets, cfg, ws);
        round.visits += score(map, &mut cands, rays, cfg, current);
        round.candidates += cands.len();
        let mut heap = UtilityHeap::new(cands);
        round.choice = next_best_view(&mut heap, cfg.utility_threshold, ws, current, cfg.path_step);
        round.heap_size = heap.len();
        if round.choice.is_some() {
            break;
        }
    }
    round
}

fn random_round<R: rand::Rng>(
    rng: &mut R,
    attention: &AttentionRegion,
    cfg: &PlannerConfig,
    ws: &WorkspaceSpec,
    current: &Vec3,
) -> Round {
    let centre = attention.center;
    let pole = workspace_pole(&centre, ws).unwrap_or_else(|| (current - centre).normalize());
    for i in 0..1000 {
        let d = random_hemisphere_direction(rng, &pole);
        let p = centre + d * cfg.sensor_distance;
        if ws.contains(&p) && ws.segment_inside(current, &p, cfg.path_step) {
            let mut vp = Viewpoint::new(i, p, centre);
            vp.cost = (p - current).norm();
            return Round::naive(Some(vp));
        }
    }
    Round::naive(None)
}

fn even_round(poses: &mut Vec<Viewpoint>, cfg: &PlannerConfig, ws: &WorkspaceSpec, current: &Vec3) -> Round {
    let mut order: Vec<usize> = (0..poses.len()).collect();
    order.sort_by(|&a, &b| {
        let da = (poses[a].position - current).norm();
        let db = (poses[b].position - current).norm();
        da.total_cmp(&db).then(poses[a].index.cmp(&poses[b].index))
    });
    let pick = order
        .into_iter()
        .find(|&i| ws.segment_inside(current, &poses[i].position, cfg.path_step));
    Round::naive(pick.map(|i| {
        let mut vp = poses.remove(i);
        vp.cost = (vp.position - current).norm();
        vp
    }))
}

fn even_poses(attention: &AttentionRegion, cfg: &PlannerConfig, ws: &WorkspaceSpec, current: &Vec3) -> Vec<Viewpoint> {
    let centre = attention.center;
    let pole = workspace_pole(&centre, ws).unwrap_or_else(|| (current - centre).normalize());
    fibonacci_hemisphere(cfg.naive_points, &pole)
        .into_iter()
        .enumerate()
        .map(|(i, d)| Viewpoint::new(i, centre + d * cfg.sensor_distance, centre))
        .filter(|vp| ws.contains(&vp.position))
        .collect()
}

fn quaternion(pose: &crate::Pose) -> [f64; 4] {
    let q = pose.rotation.coords;
    [q.x, q.y, q.z, q.w]
}

fn observe(scene: &SceneSpec, cfg: &EpisodeConfig, position: &Vec3, target: &Vec3, frame: u32) -> Observation {
    let pose = look_at(position, target);
    let mut obs = render(scene, &pose, &cfg.camera, &cfg.noise, frame_seed(scene.rng_seed, frame));
    obs.frame_id = frame;
    obs
}

fn integrate(map: &mut DualMap, obs: &Observation, cfg: &EpisodeConfig) -> usize {
    let cloud = cloud_to_world(&extract_roi_cloud(obs, &cfg.camera, &cfg.depth_filter), &obs.camera_pose);
    map.insert_cloud(&cloud, &obs.camera_pose.translation.vector)
}

/// Runs one episode: initial observation, attention extraction, then
/// observe, integrate and move until the budget runs out.
pub fn plan_episode(scene: &SceneSpec, cfg: &EpisodeConfig) -> Result<Episode> {
    let pc = &cfg.planner;
    pc.validate()?;
    cfg.camera.validate()?;
    cfg.noise.validate()?;
    let ws = &scene.workspace;
    let anchor = scene.anchor_position;
    let toward_ws = workspace_pole(&anchor, ws).unwrap_or(-Vec3::y());
    let mut position = anchor + toward_ws * cfg.initial_standoff;
    let obs = observe(scene, cfg, &position, &anchor, 0);
    let dets = detections_from_observation(&obs, &cfg.camera, &cfg.detection);
    let centroids: Vec<Vec3> = dets.iter().map(|d| d.centroid).collect();
    let (attention, _) = extract_attention(&centroids, &anchor, &cfg.attention)?;
    if !(cfg.map.fine_res < cfg.map.coarse_res) {
        return Err(Error::InvalidParams("fine resolution must be finer than coarse".into()));
    }
    let mut map = DualMap::new(cfg.map.clone(), attention);
    let wall = matches!(pc.budget, Budget::WallSeconds(_));
    let t0 = Instant::now();
    let mut pending_visits = integrate(&mut map, &obs, cfg);
    let mut pending_wall = t0.elapsed().as_secs_f64();

    let mut log = PlanningLog::default();
    log.records.push(PlanningRecord {
        iteration: 0,
        position,
        orientation: quaternion(&obs.camera_pose),
        target: anchor,
        ig: None,
        cost: None,
        utility: None,
        candidates: 0,
        heap_size: 0,
        frontiers: 0,
        voxel_visits: 0,
        evaluation_s: 0.0,
        motion_s: 0.0,
        elapsed_budget_s: 0.0,
        map_hash: map.snapshot_hash(),
        wind_offset_truth: obs.wind_offset_truth,
    });
    let mut observations = vec![obs];
    let mut detections = vec![dets];

    let rays = RayGrid::new(&cfg.camera, pc.rays_per_viewpoint[0], pc.rays_per_viewpoint[1]);
    let mut rng = ChaCha8Rng::seed_from_u64(scene.rng_seed ^ 0x5253_414D_504C_4552);
    let mut even = (pc.sampler == ViewSampler::Even).then(|| even_poses(&attention, pc, ws, &position));
    let mut elapsed = 0.0;
    let mut iteration = 0u32;
    let stop = loop {
        if let Budget::Iterations(n) = pc.budget {
            if iteration >= n {
                break StopReason::BudgetExhausted;
            }
        }
        let t_round = Instant::now();
        let round = match pc.sampler {
            ViewSampler::Frontier => frontier_round(&map, pc, &rays, ws, &position),
            ViewSampler::Random => random_round(&mut rng, &attention, pc, ws, &position),
            ViewSampler::Even => even_round(even.as_mut().expect("even poses"), pc, ws, &position),
        };
        let visits = pending_visits + round.visits;
        let evaluation_s = if wall {
            pending_wall + t_round.elapsed().as_secs_f64()
        } else {
            visits as f64 * pc.seconds_per_voxel_visit
        };
        let Some(vp) = round.choice else {
            break StopReason::NoFeasibleViewpoint;
        };
        let motion_s = (vp.position - position).norm() * pc.motion_time_per_meter;
        if let Budget::WallSeconds(b) | Budget::ModeledSeconds(b) = pc.budget {
            if elapsed + evaluation_s + motion_s > b {
                break StopReason::BudgetExhausted;
            }
        }
        elapsed += evaluation_s + motion_s;
        iteration += 1;
        position = vp.position;
        let obs = observe(scene, cfg, &position, &vp.target, iteration);
        let t_int = Instant::now();
        pending_visits = integrate(&mut map, &obs, cfg);
        pending_wall = t_int.elapsed().as_secs_f64();
        let scored = pc.sampler == ViewSampler::Frontier;
        log.records.push(PlanningRecord {
            iteration,
            position,
            orientation: quaternion(&obs.camera_pose),
            target: vp.target,
            ig: scored.then_some(vp.ig),
            cost: Some(vp.cost),
            utility: scored.then_some(vp.utility),
            candidates: round.candidates,
            heap_size: round.heap_size,
            frontiers: round.frontiers,
            voxel_visits: visits,
            evaluation_s,
            motion_s,
            elapsed_budget_s: elapsed,
            map_hash: map.snapshot_hash(),
            wind_offset_truth: obs.wind_offset_truth,
        });
        detections.push(detections_from_observation(&obs, &cfg.camera, &cfg.detection));
        observations.push(obs);
    };
    Ok(Episode {
        log,
        observations,
        detections,
        attention,
        map,
        stop,
    })
}
