use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fruitlet_nbv::geometry::look_at;
use fruitlet_nbv::harness::{
    evaluate_tracks, read_report, run_experiment, size_episode, summary_markdown, write_report, ExperimentConfig,
    Variant,
};
use fruitlet_nbv::map::io::{write_dual_map, write_occupied_ply};
use fruitlet_nbv::planner::{fibonacci_hemisphere, plan_episode, workspace_pole, Budget, PlanningLog};
use fruitlet_nbv::sim::export::{write_cloud_ply, write_disparity_pgm, write_mask_pgm};
use fruitlet_nbv::sim::{
    cloud_to_world, cluster_centroid, extract_roi_cloud, frame_seed, generate_scene, render, SceneSpec,
};
use fruitlet_nbv::sizing::{read_detections_json, run_sizing, write_detections_json, write_sizing_csv, SizingRow};
use fruitlet_nbv::Vec3;

#[derive(Parser)]
#[command(name = "fruitlet", version, about = "Next-best-view planning and fruitlet sizing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scene and render stereo observations of it.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Extra evenly spaced views around the target besides the first one.
        #[arg(long, default_value_t = 0)]
        views: usize,
    },
    /// Run one planning episode and write its log, maps and detections.
    Plan {
        #[command(flatten)]
        common: Common,
    },
    /// Register, associate and size recorded detections.
    Size {
        #[command(flatten)]
        common: Common,
        /// Per-frame detections JSON written by `plan`.
        #[arg(long)]
        detections: PathBuf,
        /// Scene JSON for ground-truth columns.
        #[arg(long, requires = "log")]
        scene: Option<PathBuf>,
        /// Planning log whose first record fixes the evaluation gauge.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Run planner variants over seeded trials and write reports.
    Experiment {
        #[command(flatten)]
        common: Common,
    },
    /// Regenerate CSV and markdown tables from an experiment directory.
    Report {
        /// Directory containing report.json.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration; flags given here take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Planner variant; repeat or comma-separate for experiments.
    #[arg(long, value_delimiter = ',')]
    variant: Vec<String>,
    /// Scene seed, or the first seed of an experiment.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, conflicts_with_all = ["budget_seconds", "budget_modeled_seconds"])]
    budget_iters: Option<u32>,
    /// Wall-clock budget: measured evaluation plus simulated motion time.
    #[arg(long, conflicts_with = "budget_modeled_seconds")]
    budget_seconds: Option<f64>,
    /// Deterministic time budget with evaluation cost modelled from voxel visits.
    #[arg(long)]
    budget_modeled_seconds: Option<f64>,
    #[arg(long)]
    coarse_res: Option<f64>,
    #[arg(long)]
    fine_res: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Worker threads for experiments; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

impl Common {
    fn experiment_config(&self) -> Result<ExperimentConfig> {
        let mut cfg: ExperimentConfig = match &self.config {
            Some(p) => serde_json::from_reader(BufReader::new(
                File::open(p).with_context(|| format!("opening {}", p.display()))?,
            ))
            .with_context(|| format!("parsing {}", p.display()))?,
            None => ExperimentConfig::default(),
        };
        if !self.variant.is_empty() {
            cfg.variants = self
                .variant
                .iter()
                .map(|v| v.parse::<Variant>())
                .collect::<Result<_, _>>()?;
        }
        if let Some(s) = self.seed {
            cfg.base_seed = s;
            cfg.seeds = None;
        }
        if let Some(n) = self.trials {
            cfg.n_trials = n;
        }
        let planner = &mut cfg.episode.planner;
        if let Some(n) = self.budget_iters {
            planner.budget = Budget::Iterations(n);
        }
        if let Some(s) = self.budget_seconds {
            planner.budget = Budget::WallSeconds(s);
        }
        if let Some(s) = self.budget_modeled_seconds {
            planner.budget = Budget::ModeledSeconds(s);
        }
        if let Some(a) = self.alpha {
            planner.alpha = a;
        }
        if let Some(r) = self.coarse_res {
            cfg.episode.map.coarse_res = r;
        }
        if let Some(r) = self.fine_res {
            cfg.episode.map.fine_res = r;
        }
        if let Some(t) = self.tau {
            cfg.sizing.tau = t;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        Ok(cfg)
    }

    /// Single variant for one-episode commands.
    fn variant(&self, cfg: &ExperimentConfig) -> Result<Variant> {
        match cfg.variants.as_slice() {
            [v] => Ok(*v),
            _ if self.variant.is_empty() => Ok(Variant::Fvp),
            _ => bail!("exactly one --variant expected"),
        }
    }

    fn seed(&self, cfg: &ExperimentConfig) -> u64 {
        cfg.seeds().first().copied().unwrap_or(cfg.base_seed)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn simulate(common: &Common, views: usize) -> Result<()> {
    let cfg = common.experiment_config()?;
    let seed = common.seed(&cfg);
    let scene = generate_scene(&cfg.scene, seed)?;
    let out = &common.out_dir;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("scene.json"), scene.to_json()?)?;
    let ep = &cfg.episode;
    let anchor = scene.anchor_position;
    let mut poses = vec![look_at(
        &(anchor + workspace_pole(&anchor, &scene.workspace).unwrap_or(-Vec3::y()) * ep.initial_standoff),
        &anchor,
    )];
    if views > 0 {
        let target = scene.target_cluster().map(cluster_centroid).unwrap_or(anchor);
        let pole = workspace_pole(&target, &scene.workspace).unwrap_or(-Vec3::y());
        for d in fibonacci_hemisphere(views, &pole) {
            poses.push(look_at(&(target + d * ep.planner.sensor_distance), &target));
        }
    }
    for (i, pose) in poses.iter().enumerate() {
        let mut obs = render(&scene, pose, &ep.camera, &ep.noise, frame_seed(scene.rng_seed, i as u32));
        obs.frame_id = i as u32;
        write_mask_pgm(&obs, create(&out.join(format!("frame_{i:03}_mask.pgm")))?)?;
        write_disparity_pgm(&obs, create(&out.join(format!("frame_{i:03}_disparity.pgm")))?)?;
        let cloud = cloud_to_world(&extract_roi_cloud(&obs, &ep.camera, &ep.depth_filter), pose);
        write_cloud_ply(&cloud, create(&out.join(format!("frame_{i:03}_cloud.ply")))?)?;
    }
    println!("scene {seed}: {} fruitlets, {} frames -> {}", scene.fruitlets().count(), poses.len(), out.display());
    Ok(())
}

fn plan(common: &Common) -> Result<bool> {
    let cfg = common.experiment_config()?;
    let variant = common.variant(&cfg)?;
    let seed = common.seed(&cfg);
    let scene = generate_scene(&cfg.scene, seed)?;
    let ecfg = variant.configure(&cfg.episode);
    let ep = plan_episode(&scene, &ecfg)?;
    let out = &common.out_dir;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("scene.json"), scene.to_json()?)?;
    ep.log.write_jsonl(create(&out.join("planning_log.jsonl"))?)?;
    write_dual_map(&ep.map, out)?;
    write_occupied_ply(ep.map.coarse(), create(&out.join("coarse_occupied.ply"))?)?;
    write_occupied_ply(ep.map.fine(), create(&out.join("fine_occupied.ply"))?)?;
    let (dets, sizing) = size_episode(&ep, &ecfg.camera, &cfg.sizing);
    write_detections_json(&dets, &out.join("detections.json"))?;
    let summary = serde_json::json!({
        "variant": variant,
        "seed": seed,
        "stop": ep.stop,
        "views": ep.observations.len(),
        "attention": ep.attention,
        "tracks": sizing.tracks.len(),
        "charged_s": ep.log.total_charge(),
    });
    std::fs::write(out.join("episode.json"), serde_json::to_string_pretty(&summary)?)?;
    println!(
        "{variant} seed {seed}: {} views, {} tracks, stop {:?} -> {}",
        ep.observations.len(),
        sizing.tracks.len(),
        ep.stop,
        out.display()
    );
    Ok(true)
}

fn size(common: &Common, detections: &Path, scene: Option<&Path>, log: Option<&Path>) -> Result<()> {
    let cfg = common.experiment_config()?;
    let dets = read_detections_json(detections)?;
    let result = run_sizing(&dets, &cfg.episode.camera, &cfg.sizing);
    let mut rows: Vec<SizingRow> = result
        .tracks
        .iter()
        .map(|t| SizingRow {
            track_id: t.track_id,
            n_members: t.members.len(),
            final_size_mm: t.final_size.map(|s| s * 1e3),
            gt_size_mm: None,
            matched_gt_id: None,
        })
        .collect();
    if let (Some(scene_path), Some(log_path)) = (scene, log) {
        let scene = SceneSpec::from_json(&std::fs::read_to_string(scene_path)?)?;
        let log = PlanningLog::read_jsonl(BufReader::new(File::open(log_path)?))?;
        let wind0 = log.records.first().context("empty planning log")?.wind_offset_truth;
        let (matches, _) = evaluate_tracks(&result.tracks, &scene, &wind0, cfg.match_gate);
        for m in matches {
            let Some(row) = rows.iter_mut().find(|r| r.track_id == m.track_id) else {
                continue;
            };
            row.gt_size_mm = Some(m.gt_size * 1e3);
            row.matched_gt_id = Some(m.fruitlet_id);
        }
    }
    std::fs::create_dir_all(&common.out_dir)?;
    write_sizing_csv(&rows, create(&common.out_dir.join("sizing.csv"))?)?;
    std::fs::write(common.out_dir.join("tracks.json"), serde_json::to_string_pretty(&result.tracks)?)?;
    println!("{} tracks -> {}", rows.len(), common.out_dir.display());
    Ok(())
}

fn experiment(common: &Common) -> Result<bool> {
    let cfg = common.experiment_config()?;
    let report = run_experiment(&cfg)?;
    write_report(&report, &common.out_dir)?;
    std::fs::write(common.out_dir.join("config.json"), serde_json::to_string_pretty(&cfg)?)?;
    print!("{}", summary_markdown(&report));
    let failed = report.trials.iter().filter(|t| t.error.is_some()).count();
    if failed > 0 {
        eprintln!("{failed} trial(s) failed");
    }
    Ok(failed == 0)
}

fn report(input: &Path, out_dir: Option<&Path>) -> Result<()> {
    let report = read_report(input)?;
    write_report(&report, out_dir.unwrap_or(input))?;
    print!("{}", summary_markdown(&report));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { common, views } => simulate(common, *views).map(|_| true),
        Command::Plan { common } => plan(common),
        Command::Size {
            common,
            detections,
            scene,
            log,
        } => size(common, detections, scene.as_deref(), log.as_deref()).map(|_| true),
        Command::Experiment { common } => experiment(common),
        Command::Report { input, out_dir } => report(input, out_dir.as_deref()).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
