//! `lanewatch`: lane-relative driving behavior monitor.

mod config;

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lanewatch::imaging::RoiPolygon;
use lanewatch::io::write_detection_log;
use lanewatch::lane::OffCenterMode;
use lanewatch::pipeline::{run, LaneSource, PipelineInputs, PipelineOutputs};
use lanewatch::scenario::{generate_scenario, write_frames, ScenarioKind};

use config::{RunConfig, SEED_ENV};

#[derive(Parser)]
#[command(name = "lanewatch", version, about = "Flags distracted and impaired driving from lane-relative vehicle motion")]
struct Cli {
    /// TOML configuration file; flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Process a detection log against a lane source and write the behavior CSV
    Run(Box<RunArgs>),
    /// Generate a synthetic scenario: detection log, lane truth and optional frames
    Simulate(Box<SimulateArgs>),
}

#[derive(Args)]
struct RunArgs {
    /// Detection log, JSON lines [input.detections]
    #[arg(long)]
    detections: Option<PathBuf>,
    /// Ground-truth lane file [input.lane_truth]
    #[arg(long, conflicts_with = "frames_dir")]
    lane_truth: Option<PathBuf>,
    /// Directory of frame_NNNNNN.pgm|ppm images [input.frames_dir]
    #[arg(long)]
    frames_dir: Option<PathBuf>,
    /// Row range "LO,HI" for lane-truth entries without one [input.truth_domain] (default 0,1439)
    #[arg(long, value_parser = parse_pair)]
    truth_domain: Option<[f64; 2]>,

    /// Behavior CSV output [output.csv]
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Annotation JSON-lines output [output.annotations]
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Write color overlay frames here; frames mode only [output.overlay_dir]
    #[arg(long)]
    overlay_dir: Option<PathBuf>,
    /// Render Avg. Lateral without trailing zeros [output.csv_trim_zeros]
    #[arg(long)]
    csv_trim_zeros: bool,
    /// Skip bad log lines and failing frames instead of aborting [run.lenient]
    #[arg(long)]
    lenient: bool,

    #[command(flatten)]
    params: ParamArgs,
}

/// Algorithm parameters shared by the config file sections of the same name.
#[derive(Args)]
struct ParamArgs {
    /// Gaussian kernel size, odd [imaging.blur_kernel] (default 5)
    #[arg(long)]
    blur_kernel: Option<usize>,
    /// Gaussian sigma [imaging.blur_sigma] (default 1.4)
    #[arg(long)]
    blur_sigma: Option<f64>,
    /// Adaptive threshold block size, odd [imaging.threshold_block] (default 15)
    #[arg(long)]
    threshold_block: Option<usize>,
    /// Adaptive threshold offset subtracted from the local mean [imaging.threshold_c] (default -5)
    #[arg(long, allow_hyphen_values = true)]
    threshold_c: Option<i32>,
    /// Canny low threshold [imaging.canny_low] (default 50)
    #[arg(long)]
    canny_low: Option<u32>,
    /// Canny high threshold [imaging.canny_high] (default 150)
    #[arg(long)]
    canny_high: Option<u32>,
    /// ROI polygon in normalized coordinates "x,y;x,y;..." [imaging.roi]
    /// (default 0,1;0.275,0.6;0.725,0.6;1,1)
    #[arg(long, value_parser = parse_roi)]
    roi: Option<RoiPolygon>,

    /// Boundary polynomial degree, 1 or 2 [lane.degree] (default 2)
    #[arg(long)]
    degree: Option<usize>,
    /// RANSAC iterations [lane.ransac_iterations] (default 200)
    #[arg(long)]
    ransac_iterations: Option<usize>,
    /// RANSAC inlier tolerance, px [lane.inlier_tol] (default 2)
    #[arg(long)]
    inlier_tol: Option<f64>,
    /// Minimum inlier fraction for a fit [lane.min_inlier_frac] (default 0.3)
    #[arg(long)]
    min_inlier_frac: Option<f64>,
    /// RANSAC seed; LANEWATCH_SEED overrides the file [lane.seed] (default 0)
    #[arg(long)]
    ransac_seed: Option<u64>,
    /// Lane smoothing factor in (0, 1] [lane.alpha] (default 0.4)
    #[arg(long)]
    alpha: Option<f64>,
    /// Frames a lane is carried without a new fit [lane.max_carry] (default 15)
    #[arg(long)]
    max_carry: Option<u32>,
    /// Off-center metric: euclidean or horizontal [lane.offcenter_mode] (default euclidean)
    #[arg(long, value_parser = parse_offcenter_mode)]
    offcenter_mode: Option<OffCenterMode>,

    /// Minimum IoU for a match [tracking.iou_min] (default 0.3)
    #[arg(long)]
    iou_min: Option<f64>,
    /// Frames a track survives unmatched [tracking.max_age] (default 15)
    #[arg(long)]
    max_age: Option<u64>,

    /// Lateral averaging window, frames [behavior.lateral_window] (default 30)
    #[arg(long)]
    lateral_window: Option<usize>,
    /// Distracted threshold on |Avg. Lateral|, px/frame [behavior.lateral_threshold] (default 0.3)
    #[arg(long)]
    lateral_threshold: Option<f64>,
    /// Distracted threshold on off-center distance, px [behavior.offcenter_threshold] (default 40)
    #[arg(long)]
    offcenter_threshold: Option<f64>,
    /// Sign changes that raise the impaired alarm [behavior.sign_change_limit] (default 3)
    #[arg(long)]
    sign_change_limit: Option<usize>,
    /// Direction deadband, px/frame [behavior.direction_deadband] (default 0.25)
    #[arg(long)]
    direction_deadband: Option<f64>,
    /// Frames a new direction must persist [behavior.direction_hold] (default 3)
    #[arg(long)]
    direction_hold: Option<usize>,
    /// Consecutive frames before the distracted alarm [behavior.persistence] (default 5)
    #[arg(long)]
    persistence: Option<usize>,
    /// Sign-change counting window, frames [behavior.oscillation_window] (default 300)
    #[arg(long)]
    oscillation_window: Option<u64>,
    /// Keep the impaired alarm on once raised [behavior.impaired_latch]
    #[arg(long)]
    impaired_latch: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// nominal, distracted or impaired [scenario.kind] (default nominal)
    #[arg(long, value_parser = parse_kind)]
    kind: Option<ScenarioKind>,
    /// Number of frames [scenario.frames] (default 400)
    #[arg(long)]
    frames: Option<u64>,
    /// Frame rate [scenario.fps] (default 30)
    #[arg(long)]
    fps: Option<f64>,
    /// Frame width, px [scenario.frame_size] (default 2560)
    #[arg(long)]
    width: Option<usize>,
    /// Frame height, px [scenario.frame_size] (default 1440)
    #[arg(long)]
    height: Option<usize>,
    /// Lane center column, px [scenario.lane_center_x] (default 1280)
    #[arg(long)]
    lane_center_x: Option<f64>,
    /// Lane width, px [scenario.lane_width] (default 400)
    #[arg(long)]
    lane_width: Option<f64>,
    /// Maneuver amplitude, px [scenario.amplitude] (default 0)
    #[arg(long)]
    amplitude: Option<f64>,
    /// Maneuver period, frames [scenario.period] (default 120)
    #[arg(long)]
    period: Option<u64>,
    /// Noise seed; LANEWATCH_SEED overrides the file [scenario.seed] (default 0)
    #[arg(long)]
    seed: Option<u64>,
    /// Gaussian jitter on the centroid column, px [scenario.noise_px] (default 0)
    #[arg(long)]
    noise: Option<f64>,
    /// Vehicle box width, px [scenario.vehicle_size] (default 160)
    #[arg(long)]
    vehicle_width: Option<f64>,
    /// Vehicle box height, px [scenario.vehicle_size] (default 120)
    #[arg(long)]
    vehicle_height: Option<f64>,
    /// Vehicle centroid row, px [scenario.vehicle_cy] (default 1000)
    #[arg(long)]
    vehicle_cy: Option<f64>,
    /// Object class label [scenario.class_label] (default car)
    #[arg(long)]
    class: Option<String>,

    /// Detection log output [simulate.detections]
    #[arg(long)]
    out_detections: Option<PathBuf>,
    /// Lane truth output [simulate.lane_truth]
    #[arg(long)]
    out_lane: Option<PathBuf>,
    /// Also render lane frames as PGM into this directory [simulate.frames_dir]
    #[arg(long)]
    frames_dir: Option<PathBuf>,
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    <[f64; 2]>::try_from(v).map_err(|_| format!("expected two comma-separated numbers, got {s:?}"))
}

fn parse_roi(s: &str) -> Result<RoiPolygon, String> {
    let vertices = s.split(';').map(parse_pair).collect::<Result<Vec<_>, _>>()?;
    RoiPolygon::new(vertices).map_err(|e| e.to_string())
}

fn parse_offcenter_mode(s: &str) -> Result<OffCenterMode, String> {
    match s {
        "euclidean" => Ok(OffCenterMode::Euclidean),
        "horizontal" => Ok(OffCenterMode::Horizontal),
        _ => Err(format!("expected euclidean or horizontal, got {s:?}")),
    }
}

fn parse_kind(s: &str) -> Result<ScenarioKind, String> {
    match s {
        "nominal" => Ok(ScenarioKind::Nominal),
        "distracted" => Ok(ScenarioKind::Distracted),
        "impaired" => Ok(ScenarioKind::Impaired),
        _ => Err(format!("expected nominal, distracted or impaired, got {s:?}")),
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl ParamArgs {
    fn apply(self, c: &mut RunConfig) {
        let i = &mut c.imaging;
        set(&mut i.blur_kernel, self.blur_kernel);
        set(&mut i.blur_sigma, self.blur_sigma);
        set(&mut i.threshold_block, self.threshold_block);
        set(&mut i.threshold_c, self.threshold_c);
        set(&mut i.canny_low, self.canny_low);
        set(&mut i.canny_high, self.canny_high);
        set(&mut i.roi, self.roi);
        let l = &mut c.lane;
        set(&mut l.degree, self.degree);
        set(&mut l.ransac_iterations, self.ransac_iterations);
        set(&mut l.inlier_tol, self.inlier_tol);
        set(&mut l.min_inlier_frac, self.min_inlier_frac);
        set(&mut l.seed, self.ransac_seed);
        set(&mut l.alpha, self.alpha);
        set(&mut l.max_carry, self.max_carry);
        set(&mut l.offcenter_mode, self.offcenter_mode);
        set(&mut c.tracking.iou_min, self.iou_min);
        set(&mut c.tracking.max_age, self.max_age);
        let b = &mut c.behavior;
        set(&mut b.lateral_window, self.lateral_window);
        set(&mut b.lateral_threshold, self.lateral_threshold);
        set(&mut b.offcenter_threshold, self.offcenter_threshold);
        set(&mut b.sign_change_limit, self.sign_change_limit);
        set(&mut b.direction_deadband, self.direction_deadband);
        set(&mut b.direction_hold, self.direction_hold);
        set(&mut b.persistence, self.persistence);
        set(&mut b.oscillation_window, self.oscillation_window);
        b.impaired_latch |= self.impaired_latch;
    }
}

fn load_config(path: Option<&std::path::Path>) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    cfg.apply_seed_env(std::env::var(SEED_ENV).ok())?;
    Ok(cfg)
}

fn cmd_run(args: RunArgs, mut cfg: RunConfig) -> Result<()> {
    set(&mut cfg.input.detections, args.detections.map(Some));
    set(&mut cfg.input.truth_domain, args.truth_domain);
    if args.lane_truth.is_some() {
        cfg.input.lane_truth = args.lane_truth;
        cfg.input.frames_dir = None;
    } else if args.frames_dir.is_some() {
        cfg.input.frames_dir = args.frames_dir;
        cfg.input.lane_truth = None;
    }
    set(&mut cfg.output.csv, args.csv.map(Some));
    set(&mut cfg.output.annotations, args.annotations.map(Some));
    set(&mut cfg.output.overlay_dir, args.overlay_dir.map(Some));
    cfg.output.csv_trim_zeros |= args.csv_trim_zeros;
    cfg.run.lenient |= args.lenient;
    args.params.apply(&mut cfg);

    let pipeline = cfg.pipeline();
    pipeline.validate()?;
    let Some(detections) = cfg.input.detections.clone() else {
        bail!("no detection log given (--detections or input.detections)");
    };
    let lane = match (cfg.input.lane_truth.clone(), cfg.input.frames_dir.clone()) {
        (Some(p), None) => LaneSource::Truth(p),
        (None, Some(d)) => LaneSource::Frames(d),
        (None, None) => bail!("no lane source given (--lane-truth or --frames-dir)"),
        (Some(_), Some(_)) => bail!("input.lane_truth and input.frames_dir are mutually exclusive"),
    };
    let Some(csv) = cfg.output.csv.clone() else {
        bail!("no CSV output given (--csv or output.csv)");
    };
    let outputs = PipelineOutputs {
        csv,
        annotations: cfg.output.annotations.clone(),
        overlay_dir: cfg.output.overlay_dir.clone(),
    };
    let summary = run(&PipelineInputs { detections, lane }, &outputs, &pipeline)?;
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    println!("{summary}");
    Ok(())
}

fn cmd_simulate(args: SimulateArgs, mut cfg: RunConfig) -> Result<()> {
    let s = &mut cfg.scenario;
    set(&mut s.kind, args.kind);
    set(&mut s.frames, args.frames);
    set(&mut s.fps, args.fps);
    set(&mut s.frame_size.0, args.width);
    set(&mut s.frame_size.1, args.height);
    set(&mut s.lane_center_x, args.lane_center_x);
    set(&mut s.lane_width, args.lane_width);
    set(&mut s.amplitude, args.amplitude);
    set(&mut s.period, args.period);
    set(&mut s.seed, args.seed);
    set(&mut s.noise_px, args.noise);
    set(&mut s.vehicle_size.0, args.vehicle_width);
    set(&mut s.vehicle_size.1, args.vehicle_height);
    set(&mut s.vehicle_cy, args.vehicle_cy);
    set(&mut s.class_label, args.class);
    let out = &mut cfg.simulate;
    set(&mut out.detections, args.out_detections.map(Some));
    set(&mut out.lane_truth, args.out_lane.map(Some));
    set(&mut out.frames_dir, args.frames_dir.map(Some));

    let spec = &cfg.scenario;
    let Some(det_path) = &cfg.simulate.detections else {
        bail!("no detection log output given (--out-detections or simulate.detections)");
    };
    let scenario = generate_scenario(spec)?;
    let file = File::create(det_path).with_context(|| format!("I/O error: {}", det_path.display()))?;
    write_detection_log(BufWriter::new(file), &scenario.detections)
        .with_context(|| format!("I/O error: {}", det_path.display()))?;
    if let Some(lane_path) = &cfg.simulate.lane_truth {
        std::fs::write(lane_path, scenario.lane.to_json())
            .with_context(|| format!("I/O error: {}", lane_path.display()))?;
    }
    if let Some(dir) = &cfg.simulate.frames_dir {
        write_frames(spec, dir)?;
    }
    println!(
        "scenario {:?}: {} frames, seed {}",
        spec.kind, spec.frames, spec.seed
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load_config(cli.config.as_deref()).and_then(|cfg| match cli.command {
        Command::Run(args) => cmd_run(*args, cfg),
        Command::Simulate(args) => cmd_simulate(*args, cfg),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
