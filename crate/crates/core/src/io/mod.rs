//! File formats: detection logs, lane truth, behavior CSV, annotation
//! records, overlay rendering and frame directories.

mod annotations;
mod csv_log;
mod detections;
mod frames;
mod lane_truth;
mod overlay;

pub use annotations::{AnnotationRecord, AnnotationWriter, LaneOverlay, ObjectAnnotation};
pub use csv_log::{format_avg_lateral, BehaviorRecord, CsvWriter, CSV_HEADER};
pub use detections::{
    open_detection_log, read_detection_log, write_detection_log, DetectionReader, FrameBatches,
};
pub use frames::{frame_file_name, list_frames};
pub use lane_truth::{read_lane_truth, LaneEntry, LaneTruth, LaneTruthProvider};
pub use overlay::render_overlay;
