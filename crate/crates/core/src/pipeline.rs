//! The end-to-end driver: lane source and detections in, behavior CSV and
//! annotations out.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::behavior::{AlarmSet, BehaviorConfig, DISTRACTED_LABEL, IMPAIRED_LABEL};
use crate::error::{Error, Result};
use crate::imaging::{edge_map, ImagingParams};
use crate::io::{
    format_avg_lateral, frame_file_name, list_frames, open_detection_log, read_lane_truth, render_overlay,
    AnnotationRecord, AnnotationWriter, BehaviorRecord, CsvWriter, FrameBatches, LaneOverlay, LaneTruthProvider,
    ObjectAnnotation,
};
use crate::lane::{estimate_lane, off_center_with_mode, LaneModel, LaneParams, LaneSmoother};
use crate::raster::Raster;
use crate::tracking::{Detection, Tracker, TrackerParams};

/// Every tunable of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub imaging: ImagingParams,
    pub lane: LaneParams,
    pub tracking: TrackerParams,
    pub behavior: BehaviorConfig,
    /// Row range for lane-truth entries that do not carry their own.
    pub truth_domain: [f64; 2],
    pub csv_trim_zeros: bool,
    /// Skip bad lines and failing frames instead of aborting.
    pub lenient: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            imaging: ImagingParams::default(),
            lane: LaneParams::default(),
            tracking: TrackerParams::default(),
            behavior: BehaviorConfig::default(),
            truth_domain: [0.0, 1439.0],
            csv_trim_zeros: false,
            lenient: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.imaging.validate()?;
        self.lane.validate()?;
        self.tracking.validate()?;
        self.behavior.validate()?;
        let [lo, hi] = self.truth_domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidConfig(format!(
                "truth_domain must be an increasing row range, got {:?}",
                self.truth_domain
            )));
        }
        Ok(())
    }
}

/// Alarm onsets, counted per track each time an alarm switches on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AlarmCounts {
    pub distracted: u64,
    pub impaired: u64,
}

/// Output of one processed frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput {
    pub records: Vec<BehaviorRecord>,
    pub annotation: AnnotationRecord,
}

/// Tracking and behavior state carried from frame to frame.
#[derive(Debug, Clone)]
pub struct FrameProcessor {
    cfg: PipelineConfig,
    tracker: Tracker,
    active: BTreeMap<u64, AlarmSet>,
    counts: AlarmCounts,
}

impl FrameProcessor {
    pub fn new(cfg: PipelineConfig) -> Self {
        let tracker = Tracker::new(cfg.tracking, cfg.behavior.clone());
        Self {
            cfg,
            tracker,
            active: BTreeMap::new(),
            counts: AlarmCounts::default(),
        }
    }

    pub fn tracker(&self) -> &Tracker {
        &self.tracker
    }

    pub fn alarm_counts(&self) -> AlarmCounts {
        self.counts
    }

    /// Tracks, measures and classifies one frame. Frames must be given in
    /// increasing order.
    pub fn process(&mut self, frame: u64, detections: &[Detection], lane: Option<&LaneModel>) -> Result<FrameOutput> {
        let assigned = self
            .tracker
            .step(detections, frame)
            .map_err(|e| e.in_stage("tracking", frame))?;
        let live: Vec<u64> = self.tracker.tracks().iter().map(|t| t.id).collect();
        self.active.retain(|id, _| live.contains(id));

        let mut records = Vec::with_capacity(assigned.len());
        let mut objects = Vec::with_capacity(assigned.len());
        for (id, j) in assigned {
            let det = &detections[j];
            let track = self
                .tracker
                .track_mut(id)
                .ok_or_else(|| Error::InvalidInput(format!("track {id} vanished")).in_stage("tracking", frame))?;
            let centroid = track.centroid();
            let off = lane
                .map(|m| off_center_with_mode(m, centroid, self.cfg.lane.offcenter_mode))
                .transpose()
                .map_err(|e| e.in_stage("lane_estimation", frame))?;
            let a = track
                .monitor
                .observe(&track.centroid_history, frame, off.map(|o| o.magnitude()), &self.cfg.behavior)
                .map_err(|e| e.in_stage("behavior", frame))?;

            let prev = self.active.insert(id, a.alarms).unwrap_or_default();
            self.counts.distracted += u64::from(a.alarms.distracted && !prev.distracted);
            self.counts.impaired += u64::from(a.alarms.impaired && !prev.impaired);

            let off_center = off.map(|o| o.magnitude().round() as i64);
            let avg = format_avg_lateral(a.mean, self.cfg.csv_trim_zeros);
            let mut alarms = Vec::new();
            if a.alarms.distracted {
                alarms.push(DISTRACTED_LABEL.to_string());
            }
            if a.alarms.impaired {
                alarms.push(IMPAIRED_LABEL.to_string());
            }
            let mut labels = vec![
                format!("{} {id}", det.class_label),
                format!("Avg Lateral: {avg}"),
                format!("Off-Center: {}", off_center.map_or("n/a".into(), |v| v.to_string())),
                format!("Direction: {}", a.direction),
                format!("Sign Changes: {}", a.sign_changes),
            ];
            labels.extend(alarms.iter().cloned());

            records.push(BehaviorRecord {
                frame,
                object_id: id,
                class_label: det.class_label.clone(),
                cx: centroid[0].round() as i64,
                cy: centroid[1].round() as i64,
                avg_lateral: a.mean.abs(),
                off_center,
                direction: a.direction,
                sign_change: a.sign_changes,
                alarms: a.alarms.label(),
            });
            objects.push(ObjectAnnotation {
                id,
                class: det.class_label.clone(),
                bbox: det.bbox.as_array(),
                centroid,
                closest_center_point: off.map(|o| o.closest),
                severity: a.severity,
                sign_changes: a.sign_changes,
                alarms,
                labels,
            });
        }
        Ok(FrameOutput {
            records,
            annotation: AnnotationRecord {
                frame,
                lane: lane.map(LaneOverlay::from),
                objects,
            },
        })
    }
}

/// Where lane geometry comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LaneSource {
    /// Directory of `frame_%06d.pgm|ppm` images run through imaging and
    /// lane estimation.
    Frames(PathBuf),
    /// Ground-truth lane file.
    Truth(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineInputs {
    pub detections: PathBuf,
    pub lane: LaneSource,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PipelineOutputs {
    pub csv: PathBuf,
    pub annotations: Option<PathBuf>,
    /// Color overlays per frame; frames mode only.
    pub overlay_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub frames_processed: u64,
    pub tracks_created: u64,
    pub alarms: AlarmCounts,
    pub skipped_frames: u64,
    /// Problems skipped over in lenient mode.
    pub warnings: Vec<String>,
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "frames processed: {}, tracks created: {}, alarms fired: distracted={} impaired={}",
            self.frames_processed, self.tracks_created, self.alarms.distracted, self.alarms.impaired
        )?;
        if self.skipped_frames > 0 || !self.warnings.is_empty() {
            write!(f, ", skipped frames: {}, warnings: {}", self.skipped_frames, self.warnings.len())?;
        }
        Ok(())
    }
}

struct Sinks {
    csv: CsvWriter<std::io::BufWriter<fs::File>>,
    annotations: Option<AnnotationWriter<std::io::BufWriter<fs::File>>>,
    overlay_dir: Option<PathBuf>,
}

impl Sinks {
    fn emit(&mut self, out: &FrameOutput, base: Option<&Raster>) -> Result<()> {
        let frame = out.annotation.frame;
        for r in &out.records {
            self.csv.write(r).map_err(|e| e.in_stage("io", frame))?;
        }
        if let Some(w) = &mut self.annotations {
            w.write(&out.annotation).map_err(|e| e.in_stage("io", frame))?;
        }
        if let (Some(dir), Some(base)) = (&self.overlay_dir, base) {
            let path = dir.join(frame_file_name(frame, "ppm"));
            render_overlay(base, &out.annotation)
                .and_then(|img| img.write_pnm(path))
                .map_err(|e| e.in_stage("io", frame))?;
        }
        Ok(())
    }
}

type Batches = FrameBatches<crate::io::DetectionReader<std::io::BufReader<fs::File>>>;

struct Driver {
    processor: FrameProcessor,
    batches: Batches,
    pending: Option<(u64, Vec<Detection>)>,
    summary: RunSummary,
    lenient: bool,
}

impl Driver {
    /// Next batch at or before `limit` (any batch when `None`), skipping
    /// bad log lines in lenient mode.
    fn take_batch(&mut self, limit: Option<u64>) -> Result<Option<(u64, Vec<Detection>)>> {
        if self.pending.is_none() {
            loop {
                match self.batches.next() {
                    None => break,
                    Some(Ok(b)) => {
                        self.pending = Some(b);
                        break;
                    }
                    Some(Err(e)) if self.lenient => self.summary.warnings.push(format!("detection log: {e}")),
                    Some(Err(e)) => return Err(e),
                }
            }
        }
        match (&self.pending, limit) {
            (Some((f, _)), Some(limit)) if *f > limit => Ok(None),
            _ => Ok(self.pending.take()),
        }
    }

    /// Applies the lenient policy to a per-frame failure.
    fn tolerate(&mut self, err: Error) -> Result<()> {
        if self.lenient {
            self.summary.skipped_frames += 1;
            self.summary.warnings.push(err.to_string());
            Ok(())
        } else {
            Err(err)
        }
    }

    fn step(&mut self, sinks: &mut Sinks, frame: u64, dets: &[Detection], lane: Option<&LaneModel>, base: Option<&Raster>) -> Result<()> {
        let out = match self.processor.process(frame, dets, lane) {
            Ok(out) => out,
            Err(e) => return self.tolerate(e),
        };
        sinks.emit(&out, base)?;
        self.summary.frames_processed += 1;
        Ok(())
    }
}

fn lane_from_image(path: &Path, frame: u64, cfg: &PipelineConfig) -> Result<(Raster, Option<LaneModel>)> {
    let img = Raster::read_pnm(path).map_err(|e| e.in_stage("io", frame))?;
    let edges = edge_map(&img, &cfg.imaging).map_err(|e| e.in_stage("imaging", frame))?;
    let model = estimate_lane(&edges, &cfg.imaging.roi, &cfg.lane.ransac(), frame)
        .map_err(|e| e.in_stage("lane_estimation", frame))?;
    Ok((img, model))
}

/// Runs the whole pipeline. The configuration and every input are checked
/// before the first frame; afterwards errors abort unless `cfg.lenient`.
pub fn run(inputs: &PipelineInputs, outputs: &PipelineOutputs, cfg: &PipelineConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let reader = open_detection_log(&inputs.detections)?;
    enum Source {
        Frames(Vec<(u64, PathBuf)>),
        Truth(LaneTruthProvider),
    }
    let source = match &inputs.lane {
        LaneSource::Frames(dir) => Source::Frames(list_frames(dir)?),
        LaneSource::Truth(path) => Source::Truth(LaneTruthProvider::new(
            &read_lane_truth(path)?,
            cfg.truth_domain,
            cfg.lane.max_carry,
        )?),
    };
    if outputs.overlay_dir.is_some() && matches!(source, Source::Truth(_)) {
        return Err(Error::InvalidConfig("overlays need frames as the lane source".into()));
    }
    if let Some(dir) = &outputs.overlay_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut sinks = Sinks {
        csv: CsvWriter::create(&outputs.csv, cfg.csv_trim_zeros)?,
        annotations: outputs.annotations.as_ref().map(AnnotationWriter::create).transpose()?,
        overlay_dir: outputs.overlay_dir.clone(),
    };
    let mut driver = Driver {
        processor: FrameProcessor::new(cfg.clone()),
        batches: FrameBatches::new(reader),
        pending: None,
        summary: RunSummary::default(),
        lenient: cfg.lenient,
    };

    match source {
        Source::Truth(provider) => {
            let mut next_frame: Option<u64> = None;
            while let Some((frame, dets)) = driver.take_batch(None)? {
                // frames without detections still age tracks and get annotations
                for empty in next_frame.unwrap_or(frame)..frame {
                    let lane = provider.model_at(empty);
                    driver.step(&mut sinks, empty, &[], lane.as_ref(), None)?;
                }
                let lane = provider.model_at(frame);
                driver.step(&mut sinks, frame, &dets, lane.as_ref(), None)?;
                next_frame = Some(frame + 1);
            }
        }
        Source::Frames(frames) => {
            let mut smoother = LaneSmoother::new(cfg.lane.alpha, cfg.lane.max_carry)?;
            for (frame, path) in frames {
                let mut dets = Vec::new();
                while let Some((f, batch)) = driver.take_batch(Some(frame))? {
                    if f == frame {
                        dets = batch;
                    } else {
                        let e = Error::InvalidInput(format!("detections for frame {f} have no image"));
                        driver.tolerate(e.in_stage("io", f))?;
                    }
                }
                let (img, model) = match lane_from_image(&path, frame, cfg) {
                    Ok(v) => v,
                    Err(e) => {
                        driver.tolerate(e)?;
                        continue;
                    }
                };
                let lane = smoother.update(model);
                driver.step(&mut sinks, frame, &dets, lane.as_ref(), Some(&img))?;
            }
            while let Some((f, _)) = driver.take_batch(None)? {
                let e = Error::InvalidInput(format!("detections for frame {f} have no image"));
                driver.tolerate(e.in_stage("io", f))?;
            }
        }
    }

    sinks.csv.finish()?;
    if let Some(w) = sinks.annotations {
        w.finish()?;
    }
    let mut summary = driver.summary;
    summary.tracks_created = driver.processor.tracker().created();
    summary.alarms = driver.processor.alarm_counts();
    Ok(summary)
}
