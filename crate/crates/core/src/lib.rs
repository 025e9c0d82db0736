//! Lane-relative behavior monitoring for vehicles seen by a forward camera.
//!
//! The crate turns per-frame object detections plus a lane source into
//! per-object behavior rows and alarms for distracted or impaired driving.
//!
//! - [`imaging`]: edge maps from raw frames
//! - [`lane`]: boundary fitting, smoothing and off-center distance
//! - [`tracking`]: IoU association into persistent tracks
//! - [`behavior`]: lateral motion, sign changes, alarms and severity
//! - [`scenario`]: synthetic detection logs and frames
//! - [`io`]: file formats
//! - [`pipeline`]: the per-frame driver and the batch runner
//!
//! ```
//! use lanewatch::pipeline::{FrameProcessor, PipelineConfig};
//! use lanewatch::tracking::{BBox, Detection};
//!
//! let mut p = FrameProcessor::new(PipelineConfig::default());
//! let d = Detection { frame: 0, class_label: "car".into(), bbox: BBox::new(0.0, 0.0, 10.0, 10.0), confidence: 1.0 };
//! let out = p.process(0, &[d], None)?;
//! assert_eq!(out.records[0].off_center, None);
//! # Ok::<(), lanewatch::Error>(())
//! ```

// `!(x > 0.0)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod behavior;
pub mod error;
pub mod imaging;
pub mod io;
pub mod lane;
pub mod pipeline;
pub mod raster;
pub mod scenario;
pub mod tracking;

pub use error::{Error, Result};

/// Guide chapters compiled as doctests so their snippets stay current.
#[cfg(doctest)]
mod guide {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!(concat!("../../../book/src/", $path))]
            pub struct $name;
        };
    }
    chapter!(Introduction, "introduction.md");
    chapter!(Imaging, "imaging.md");
    chapter!(Lanes, "lanes.md");
    chapter!(Tracking, "tracking.md");
    chapter!(Behavior, "behavior.md");
    chapter!(Scenarios, "scenarios.md");
    chapter!(Formats, "formats.md");
    chapter!(Cli, "cli.md");
}
