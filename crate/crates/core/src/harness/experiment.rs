use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, match_to_ground_truth, Metrics};
use super::variant::Variant;
use crate::planner::{plan_episode, Episode, EpisodeConfig, StopReason};
use crate::sim::{generate_scene, CameraModel, SceneGenParams, SceneSpec};
use crate::sizing::{run_sizing, Detection, FruitletTrack, SizingConfig, SizingResult};
use crate::{Error, Result, Vec3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub variants: Vec<Variant>,
    pub n_trials: usize,
    /// Explicit scene seeds; `base_seed..base_seed + n_trials` otherwise.
    pub seeds: Option<Vec<u64>>,
    pub base_seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    /// Largest track to ground-truth distance that counts as a match.
    pub match_gate: f64,
    pub scene: SceneGenParams,
    pub episode: EpisodeConfig,
    pub sizing: SizingConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            variants: Variant::ALL.to_vec(),
            n_trials: 12,
            seeds: None,
            base_seed: 0,
            workers: 0,
            match_gate: 0.01,
            scene: SceneGenParams::default(),
            episode: EpisodeConfig::default(),
            sizing: SizingConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn seeds(&self) -> Vec<u64> {
        self.seeds
            .clone()
            .unwrap_or_else(|| (0..self.n_trials as u64).map(|i| self.base_seed + i).collect())
    }
}

/// One ground-truth fruitlet matched to a track.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchedFruitlet {
    pub fruitlet_id: u32,
    pub track_id: u32,
    pub gt_size: f64,
    pub measured_size: f64,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub variant: Variant,
    pub seed: u64,
    pub error: Option<String>,
    pub stop: Option<StopReason>,
    pub n_views: usize,
    pub n_candidates: usize,
    pub n_tracks: usize,
    pub n_ground_truth: usize,
    pub matches: Vec<MatchedFruitlet>,
    /// Charged evaluation and motion time, seconds.
    pub charged_s: f64,
}

impl TrialResult {
    pub fn metrics(&self) -> Metrics {
        let pairs: Vec<(f64, f64)> = self.matches.iter().map(|m| (m.measured_size, m.gt_size)).collect();
        compute_metrics(&pairs, self.n_ground_truth)
    }
}

/// Keeps detections whose centroid lies in the attention region.
pub fn attention_detections(ep: &Episode) -> Vec<Vec<Detection>> {
    ep.detections
        .iter()
        .map(|frame| {
            frame
                .iter()
                .filter(|d| ep.attention.contains(&d.centroid))
                .cloned()
                .enumerate()
                .map(|(i, mut d)| {
                    d.index = i as u32;
                    d
                })
                .collect()
        })
        .collect()
}

/// Sizing stage over an episode's attention-region detections.
pub fn size_episode(ep: &Episode, camera: &CameraModel, cfg: &SizingConfig) -> (Vec<Vec<Detection>>, SizingResult) {
    let dets = attention_detections(ep);
    let result = run_sizing(&dets, camera, cfg);
    (dets, result)
}

/// Matches sized tracks to the target cluster's fruitlets.
///
/// Tracks live in the first frame's gauge, so that frame's wind offset is
/// removed before comparing with scene coordinates.
pub fn evaluate_tracks(tracks: &[FruitletTrack], scene: &SceneSpec, gauge_wind: &Vec3, gate: f64) -> (Vec<MatchedFruitlet>, usize) {
    let truth: Vec<_> = scene.target_cluster().map(|c| c.fruitlets.iter().collect()).unwrap_or_default();
    let sized: Vec<&FruitletTrack> = tracks.iter().filter(|t| t.final_size.is_some()).collect();
    let positions: Vec<Vec3> = sized.iter().map(|t| t.position - gauge_wind).collect();
    let centres: Vec<Vec3> = truth.iter().map(|f| f.center).collect();
    let matches = match_to_ground_truth(&positions, &centres, gate)
        .into_iter()
        .map(|(t, g)| MatchedFruitlet {
            fruitlet_id: truth[g].fruitlet_id,
            track_id: sized[t].track_id,
            gt_size: truth[g].diameter,
            measured_size: sized[t].final_size.expect("sized track"),
            distance: (positions[t] - centres[g]).norm(),
        })
        .collect();
    (matches, truth.len())
}

fn trial_inner(variant: Variant, seed: u64, cfg: &ExperimentConfig, out: &mut TrialResult) -> Result<()> {
    let scene = generate_scene(&cfg.scene, seed)?;
    out.n_ground_truth = scene.target_cluster().map_or(0, |c| c.fruitlets.len());
    let ecfg = variant.configure(&cfg.episode);
    let ep = plan_episode(&scene, &ecfg)?;
    out.stop = Some(ep.stop);
    out.n_views = ep.observations.len();
    out.n_candidates = ep.log.records.iter().map(|r| r.candidates).sum();
    out.charged_s = ep.log.total_charge();
    let (_, sizing) = size_episode(&ep, &ecfg.camera, &cfg.sizing);
    out.n_tracks = sizing.tracks.len();
    let wind0 = ep.log.records[0].wind_offset_truth;
    let (matches, _) = evaluate_tracks(&sizing.tracks, &scene, &wind0, cfg.match_gate);
    out.matches = matches;
    Ok(())
}

/// Scene generation, planning, sizing and evaluation for one seed.
/// Failures are recorded in the result.
pub fn run_trial(variant: Variant, seed: u64, cfg: &ExperimentConfig) -> TrialResult {
    let mut out = TrialResult {
        variant,
        seed,
        error: None,
        stop: None,
        n_views: 0,
        n_candidates: 0,
        n_tracks: 0,
        n_ground_truth: 0,
        matches: Vec::new(),
        charged_s: 0.0,
    };
    if let Err(e) = trial_inner(variant, seed, cfg, &mut out) {
        log::warn!("trial {variant} seed {seed} failed: {e}");
        out.error = Some(e.to_string());
    }
    out
}

/// Pooled results of one variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: Variant,
    pub n_trials: usize,
    pub n_failed: usize,
    pub mean_views: f64,
    pub metrics: Metrics,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    /// Variant-major, seeds in configured order.
    pub trials: Vec<TrialResult>,
    pub summaries: Vec<VariantSummary>,
}

impl ExperimentReport {
    pub fn any_failed(&self) -> bool {
        self.trials.iter().any(|t| t.error.is_some())
    }

    pub fn trial(&self, variant: Variant, seed: u64) -> Option<&TrialResult> {
        self.trials.iter().find(|t| t.variant == variant && t.seed == seed)
    }

    pub fn summary(&self, variant: Variant) -> Option<&VariantSummary> {
        self.summaries.iter().find(|s| s.variant == variant)
    }
}

pub fn summarize(variant: Variant, trials: &[&TrialResult]) -> VariantSummary {
    let pairs: Vec<(f64, f64)> = trials
        .iter()
        .flat_map(|t| t.matches.iter().map(|m| (m.measured_size, m.gt_size)))
        .collect();
    let n_gt = trials.iter().map(|t| t.n_ground_truth).sum();
    let mean_views = if trials.is_empty() {
        0.0
    } else {
        trials.iter().map(|t| t.n_views as f64).sum::<f64>() / trials.len() as f64
    };
    VariantSummary {
        variant,
        n_trials: trials.len(),
        n_failed: trials.iter().filter(|t| t.error.is_some()).count(),
        mean_views,
        metrics: compute_metrics(&pairs, n_gt),
    }
}

/// Runs every variant on every seed. Results do not depend on the worker
/// count in iteration-budget mode.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.episode.planner.validate()?;
    let seeds = cfg.seeds();
    let jobs: Vec<(Variant, u64)> = cfg
        .variants
        .iter()
        .flat_map(|&v| seeds.iter().map(move |&s| (v, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidParams(format!("worker pool: {e}")))?;
    let trials: Vec<TrialResult> = pool.install(|| jobs.par_iter().map(|&(v, s)| run_trial(v, s, cfg)).collect());
    let summaries = cfg
        .variants
        .iter()
        .map(|&v| {
            let mine: Vec<&TrialResult> = trials.iter().filter(|t| t.variant == v).collect();
            summarize(v, &mine)
        })
        .collect();
    Ok(ExperimentReport { trials, summaries })
}

/// Every variant on the base configuration's seeds.
pub fn ablation_matrix(base: &ExperimentConfig) -> Result<ExperimentReport> {
    let cfg = ExperimentConfig {
        variants: Variant::ALL.to_vec(),
        ..base.clone()
    };
    run_experiment(&cfg)
}
