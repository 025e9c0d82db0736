//! Lateral-motion metrics and the distracted / impaired driver alarms.
//!
//! Lateral movement is the signed per-frame change of a track's centroid `x`.
//! Its mean over a short window gives a motion direction (with a dead-band
//! around zero), and flips of that direction between left and right are
//! counted as sign changes. Frequent sign changes indicate impaired driving;
//! sustained lateral movement far from the lane center indicates distraction.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tracking::CentroidSample;

pub const DISTRACTED_LABEL: &str = "DISTRACTED DRIVER AHEAD";
pub const IMPAIRED_LABEL: &str = "IMPAIRED DRIVER AHEAD";

/// Thresholds and windows for behavior classification. Distances are in
/// pixels, rates in pixels per frame, windows in frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BehaviorConfig {
    pub lateral_window: usize,
    pub lateral_threshold: f64,
    pub offcenter_threshold: f64,
    pub sign_change_limit: usize,
    pub direction_deadband: f64,
    /// Frames a raw direction must repeat before it is reported.
    pub direction_hold: usize,
    pub persistence: usize,
    pub oscillation_window: u64,
    /// Keep the impaired alarm on for the rest of the track once raised.
    pub impaired_latch: bool,
}

impl Default for BehaviorConfig {
    fn default() -> Self {
        Self {
            lateral_window: 30,
            lateral_threshold: 0.3,
            offcenter_threshold: 40.0,
            sign_change_limit: 3,
            direction_deadband: 0.25,
            direction_hold: 3,
            persistence: 5,
            oscillation_window: 300,
            impaired_latch: false,
        }
    }
}

impl BehaviorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lateral_threshold", self.lateral_threshold),
            ("offcenter_threshold", self.offcenter_threshold),
            ("direction_deadband", self.direction_deadband),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("behavior.{name} must be > 0, got {v}")));
            }
        }
        let windows = [
            ("lateral_window", self.lateral_window as u64),
            ("sign_change_limit", self.sign_change_limit as u64),
            ("direction_hold", self.direction_hold as u64),
            ("persistence", self.persistence as u64),
            ("oscillation_window", self.oscillation_window),
        ];
        for (name, v) in windows {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("behavior.{name} must be >= 1")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Left,
    Right,
    #[default]
    Steady,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Left => "Left",
            Direction::Right => "Right",
            Direction::Steady => "Steady",
        }
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
            Direction::Steady => Direction::Steady,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-frame centroid `x` increments of a history.
pub fn lateral_deltas(history: &[CentroidSample]) -> Vec<f64> {
    history.windows(2).map(|w| w[1].cx - w[0].cx).collect()
}

/// Mean of the last `window` deltas (or all of them if fewer), `0.0` for an
/// empty slice.
pub fn windowed_lateral_mean(deltas: &[f64], window: usize) -> f64 {
    let n = window.min(deltas.len());
    if n == 0 {
        return 0.0;
    }
    deltas[deltas.len() - n..].iter().sum::<f64>() / n as f64
}

pub fn classify_direction(mean: f64, deadband: f64) -> Direction {
    if mean.abs() <= deadband {
        Direction::Steady
    } else if mean > deadband {
        Direction::Right
    } else {
        Direction::Left
    }
}

/// Debounces raw direction classifications: a new direction is reported only
/// after it has been observed on `hold` consecutive frames.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionFilter {
    hold: usize,
    candidate: Direction,
    run: usize,
    stable: Direction,
}

impl DirectionFilter {
    pub fn new(hold: usize) -> Self {
        Self {
            hold: hold.max(1),
            candidate: Direction::Steady,
            run: 0,
            stable: Direction::Steady,
        }
    }

    pub fn update(&mut self, raw: Direction) -> Direction {
        if raw == self.candidate {
            self.run += 1;
        } else {
            self.candidate = raw;
            self.run = 1;
        }
        if self.run >= self.hold {
            self.stable = self.candidate;
        }
        self.stable
    }

    pub fn current(&self) -> Direction {
        self.stable
    }
}

/// Polarity bookkeeping for sign-change detection on one track.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OscillationState {
    /// `Left` or `Right` once a first non-steady direction is seen.
    pub last_polarity: Option<Direction>,
    /// Frames at which the polarity flipped.
    pub sign_change_events: Vec<u64>,
    pub current_direction: Direction,
    last_frame: Option<u64>,
}

impl OscillationState {
    /// Feeds one frame's direction and returns the number of sign changes
    /// within the trailing `window` frames (those with index `> frame - window`).
    ///
    /// Steady frames never change polarity. The first Left/Right locks the
    /// polarity without counting; afterwards each direction opposite to the
    /// locked polarity records an event and flips it.
    pub fn register_sign_change(&mut self, direction: Direction, frame: u64, window: u64) -> Result<usize> {
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(Error::InvalidInput(format!(
                    "sign-change frames must increase: got {frame} after {last}"
                )));
            }
        }
        self.last_frame = Some(frame);
        self.current_direction = direction;
        if direction != Direction::Steady {
            match self.last_polarity {
                None => self.last_polarity = Some(direction),
                Some(p) if p != direction => {
                    self.sign_change_events.push(frame);
                    self.last_polarity = Some(direction);
                }
                Some(_) => {}
            }
        }
        Ok(self.count_in_window(frame, window))
    }

    pub fn count_in_window(&self, frame: u64, window: u64) -> usize {
        let floor = frame as i64 - window as i64;
        self.sign_change_events
            .iter()
            .rev()
            .take_while(|&&f| f as i64 > floor)
            .count()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlarmSet {
    pub distracted: bool,
    pub impaired: bool,
}

impl AlarmSet {
    pub fn any(&self) -> bool {
        self.distracted || self.impaired
    }

    /// Rendering used in the CSV `Alarms` column.
    pub fn label(&self) -> String {
        match (self.distracted, self.impaired) {
            (false, false) => String::new(),
            (true, false) => DISTRACTED_LABEL.to_string(),
            (false, true) => IMPAIRED_LABEL.to_string(),
            (true, true) => format!("{DISTRACTED_LABEL}; {IMPAIRED_LABEL}"),
        }
    }
}

/// Whether this frame alone satisfies the distracted-driving condition.
pub fn distracted_condition(mean: f64, offcenter_magnitude: f64, cfg: &BehaviorConfig) -> bool {
    mean.abs() > cfg.lateral_threshold && offcenter_magnitude > cfg.offcenter_threshold
}

/// Level-based alarm evaluation for one frame. `consecutive_distracted_frames`
/// counts the frames (including this one) over which the distracted
/// condition has held without interruption.
pub fn evaluate_alarms(
    mean: f64,
    offcenter_magnitude: f64,
    count_in_window: usize,
    consecutive_distracted_frames: usize,
    cfg: &BehaviorConfig,
) -> AlarmSet {
    AlarmSet {
        distracted: distracted_condition(mean, offcenter_magnitude, cfg)
            && consecutive_distracted_frames >= cfg.persistence,
        impaired: count_in_window >= cfg.sign_change_limit,
    }
}

/// Display severity of a track, escalating with its recent sign changes.
/// Serialized as its display color.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Severity {
    #[default]
    #[serde(rename = "blue")]
    Normal,
    #[serde(rename = "yellow")]
    Caution,
    #[serde(rename = "red")]
    Alert,
}

impl Severity {
    pub fn color(self) -> &'static str {
        match self {
            Severity::Normal => "blue",
            Severity::Caution => "yellow",
            Severity::Alert => "red",
        }
    }
}

pub fn severity_state(count_in_window: usize) -> Severity {
    match count_in_window {
        0 | 1 => Severity::Normal,
        2 => Severity::Caution,
        _ => Severity::Alert,
    }
}

/// Everything the behavior stage concludes about a track on one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Assessment {
    pub mean: f64,
    pub raw_direction: Direction,
    pub direction: Direction,
    pub sign_changes: usize,
    pub alarms: AlarmSet,
    pub severity: Severity,
}

/// Per-track behavior state, advanced once per frame the track is observed.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackMonitor {
    pub oscillation: OscillationState,
    filter: DirectionFilter,
    distracted_streak: usize,
    impaired_latched: bool,
}

impl TrackMonitor {
    pub fn new(cfg: &BehaviorConfig) -> Self {
        Self {
            oscillation: OscillationState::default(),
            filter: DirectionFilter::new(cfg.direction_hold),
            distracted_streak: 0,
            impaired_latched: false,
        }
    }

    /// Assesses the latest state of `history` at `frame`. `offcenter` is the
    /// off-center magnitude, or `None` when no lane reference is available;
    /// in that case both alarms are held off.
    ///
    /// Directions are only classified once a full `lateral_window` of deltas
    /// exists; shorter histories report `Steady`.
    pub fn observe(
        &mut self,
        history: &[CentroidSample],
        frame: u64,
        offcenter: Option<f64>,
        cfg: &BehaviorConfig,
    ) -> Result<Assessment> {
        let deltas = lateral_deltas(history);
        let mean = windowed_lateral_mean(&deltas, cfg.lateral_window);
        let raw_direction = if deltas.len() >= cfg.lateral_window {
            classify_direction(mean, cfg.direction_deadband)
        } else {
            Direction::Steady
        };
        let direction = self.filter.update(raw_direction);
        let sign_changes = self
            .oscillation
            .register_sign_change(direction, frame, cfg.oscillation_window)?;

        let alarms = match offcenter {
            Some(off) => {
                if distracted_condition(mean, off, cfg) {
                    self.distracted_streak += 1;
                } else {
                    self.distracted_streak = 0;
                }
                let mut alarms = evaluate_alarms(mean, off, sign_changes, self.distracted_streak, cfg);
                if cfg.impaired_latch {
                    self.impaired_latched |= alarms.impaired;
                    alarms.impaired = self.impaired_latched;
                }
                alarms
            }
            None => {
                self.distracted_streak = 0;
                AlarmSet::default()
            }
        };

        Ok(Assessment {
            mean,
            raw_direction,
            direction,
            sign_changes,
            alarms,
            severity: severity_state(sign_changes),
        })
    }
}
