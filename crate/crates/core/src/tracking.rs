//! Identity assignment for per-frame vehicle detections.
//!
//! Association is greedy on IoU against each track's last box, with no
//! motion prediction. Track ids are handed out sequentially and never reused.

use serde::{Deserialize, Serialize};

use crate::behavior::{BehaviorConfig, TrackMonitor};
use crate::error::{Error, Result};

/// Axis-aligned box in pixels, top-left corner plus size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn centroid(&self) -> [f64; 2] {
        [self.x + self.w / 2.0, self.y + self.h / 2.0]
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn is_valid(&self) -> bool {
        [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite()) && self.w > 0.0 && self.h > 0.0
    }

    /// Intersection with the frame rectangle, or `None` if nothing remains.
    pub fn clamp_to(&self, width: f64, height: f64) -> Option<BBox> {
        let x0 = self.x.max(0.0);
        let y0 = self.y.max(0.0);
        let x1 = (self.x + self.w).min(width);
        let y1 = (self.y + self.h).min(height);
        (x1 > x0 && y1 > y0).then(|| BBox::new(x0, y0, x1 - x0, y1 - y0))
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }
}

/// Intersection over union; 0 for disjoint boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = ((a.x + a.w).min(b.x + b.w) - a.x.max(b.x)).max(0.0);
    let ih = ((a.y + a.h).min(b.y + b.h) - a.y.max(b.y)).max(0.0);
    let inter = iw * ih;
    if inter <= 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

/// One object reported by the external detector.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame: u64,
    pub class_label: String,
    pub bbox: BBox,
    pub confidence: f64,
}

impl Detection {
    pub fn validate(&self) -> Result<()> {
        if !self.bbox.is_valid() {
            return Err(Error::InvalidInput(format!(
                "frame {}: bounding box {:?} must have positive width and height",
                self.frame,
                self.bbox.as_array()
            )));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::InvalidInput(format!(
                "frame {}: confidence {} outside [0, 1]",
                self.frame, self.confidence
            )));
        }
        Ok(())
    }

    pub fn centroid(&self) -> [f64; 2] {
        self.bbox.centroid()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CentroidSample {
    pub frame: u64,
    pub cx: f64,
    pub cy: f64,
}

/// A persistent object identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub class_label: String,
    pub centroid_history: Vec<CentroidSample>,
    pub last_seen: u64,
    pub last_bbox: BBox,
    pub monitor: TrackMonitor,
}

impl Track {
    pub fn new(id: u64, detection: &Detection, cfg: &BehaviorConfig) -> Self {
        let [cx, cy] = detection.centroid();
        Self {
            id,
            class_label: detection.class_label.clone(),
            centroid_history: vec![CentroidSample {
                frame: detection.frame,
                cx,
                cy,
            }],
            last_seen: detection.frame,
            last_bbox: detection.bbox,
            monitor: TrackMonitor::new(cfg),
        }
    }

    pub fn centroid(&self) -> [f64; 2] {
        self.centroid_history
            .last()
            .map(|s| [s.cx, s.cy])
            .unwrap_or_else(|| self.last_bbox.centroid())
    }
}

/// Appends the detection's centroid to the track's history.
pub fn update_track(track: &mut Track, detection: &Detection, frame: u64) -> Result<()> {
    if let Some(last) = track.centroid_history.last() {
        if frame <= last.frame {
            return Err(Error::InvalidInput(format!(
                "track {}: frame {frame} does not follow its last sample at frame {}",
                track.id, last.frame
            )));
        }
    }
    let [cx, cy] = detection.centroid();
    track.centroid_history.push(CentroidSample { frame, cx, cy });
    track.last_seen = frame;
    track.last_bbox = detection.bbox;
    Ok(())
}

/// Outcome of matching one frame's detections against the live tracks.
/// Detections are referred to by index into the input slice.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Association {
    pub matches: Vec<(u64, usize)>,
    pub new_tracks: Vec<usize>,
    pub expired: Vec<u64>,
}

/// Greedy one-to-one assignment on a score table (`rows x columns`): pairs
/// are taken in order of decreasing score, ties broken by row then column,
/// skipping pairs below `min_score` or whose row or column is already used.
pub fn greedy_assign(table: &[Vec<f64>], min_score: f64) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(f64, usize, usize)> = table
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, &v)| (v, i, j)))
        .filter(|&(v, _, _)| v >= min_score && v > 0.0)
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let cols = table.iter().map(Vec::len).max().unwrap_or(0);
    let mut row_used = vec![false; table.len()];
    let mut col_used = vec![false; cols];
    let mut out = Vec::new();
    for (_, i, j) in pairs {
        if row_used[i] || col_used[j] {
            continue;
        }
        row_used[i] = true;
        col_used[j] = true;
        out.push((i, j));
    }
    out
}

/// Greedy IoU matching.
///
/// Tracks unseen for more than `max_age` frames are expired and take no part
/// in matching. Remaining (track, detection) pairs with IoU of at least
/// `iou_min` are matched in order of decreasing IoU (ties broken by track id,
/// then detection index); each side is used at most once.
pub fn associate(detections: &[Detection], tracks: &[Track], iou_min: f64, max_age: u64, frame: u64) -> Result<Association> {
    if let Some(d) = detections.iter().find(|d| d.frame != frame) {
        return Err(Error::InvalidInput(format!(
            "detection for frame {} passed to association of frame {frame}",
            d.frame
        )));
    }
    let mut out = Association::default();
    let mut live = Vec::new();
    for t in tracks {
        if frame.saturating_sub(t.last_seen) > max_age {
            out.expired.push(t.id);
        } else {
            live.push(t);
        }
    }

    let table: Vec<Vec<f64>> = live
        .iter()
        .map(|t| detections.iter().map(|d| iou(&t.last_bbox, &d.bbox)).collect())
        .collect();
    let mut det_used = vec![false; detections.len()];
    for (ti, dj) in greedy_assign(&table, iou_min) {
        det_used[dj] = true;
        out.matches.push((live[ti].id, dj));
    }
    out.matches.sort_unstable();
    out.new_tracks = (0..detections.len()).filter(|&j| !det_used[j]).collect();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerParams {
    pub iou_min: f64,
    pub max_age: u64,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            iou_min: 0.3,
            max_age: 15,
        }
    }
}

impl TrackerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_min > 0.0 && self.iou_min <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "tracking.iou_min must lie in (0, 1], got {}",
                self.iou_min
            )));
        }
        Ok(())
    }
}

/// The single-writer track store.
#[derive(Debug, Clone)]
pub struct Tracker {
    params: TrackerParams,
    behavior: BehaviorConfig,
    tracks: Vec<Track>,
    next_id: u64,
}

impl Tracker {
    pub fn new(params: TrackerParams, behavior: BehaviorConfig) -> Self {
        Self {
            params,
            behavior,
            tracks: Vec::new(),
            next_id: 0,
        }
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn tracks_mut(&mut self) -> &mut [Track] {
        &mut self.tracks
    }

    pub fn track_mut(&mut self, id: u64) -> Option<&mut Track> {
        self.tracks.iter_mut().find(|t| t.id == id)
    }

    /// Number of tracks created so far.
    pub fn created(&self) -> u64 {
        self.next_id
    }

    /// Associates this frame's detections, updates matched tracks, spawns
    /// new ones and drops expired ones. Returns `(track id, detection index)`
    /// for every detection, sorted by track id.
    pub fn step(&mut self, detections: &[Detection], frame: u64) -> Result<Vec<(u64, usize)>> {
        let assoc = associate(detections, &self.tracks, self.params.iou_min, self.params.max_age, frame)?;
        self.tracks.retain(|t| !assoc.expired.contains(&t.id));
        let mut assigned = Vec::with_capacity(detections.len());
        for &(id, j) in &assoc.matches {
            let track = self
                .track_mut(id)
                .ok_or_else(|| Error::InvalidInput(format!("unknown track {id}")))?;
            update_track(track, &detections[j], frame)?;
            assigned.push((id, j));
        }
        for &j in &assoc.new_tracks {
            let id = self.next_id;
            self.next_id += 1;
            self.tracks.push(Track::new(id, &detections[j], &self.behavior));
            assigned.push((id, j));
        }
        assigned.sort_unstable();
        Ok(assigned)
    }
}
