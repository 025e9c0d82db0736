use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::behavior::Severity;
use crate::error::{Error, Result};
use crate::lane::LaneModel;

/// Lane curves drawn on a frame; all share `domain`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneOverlay {
    pub left: [f64; 3],
    pub right: [f64; 3],
    pub center: [f64; 3],
    pub domain: [f64; 2],
}

impl From<&LaneModel> for LaneOverlay {
    fn from(m: &LaneModel) -> Self {
        Self {
            left: m.left.coeffs,
            right: m.right.coeffs,
            center: m.center.coeffs,
            domain: m.center.domain,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectAnnotation {
    pub id: u64,
    pub class: String,
    /// `[x, y, w, h]`.
    pub bbox: [f64; 4],
    pub centroid: [f64; 2],
    pub closest_center_point: Option<[f64; 2]>,
    pub severity: Severity,
    pub sign_changes: usize,
    pub alarms: Vec<String>,
    pub labels: Vec<String>,
}

/// Everything drawn on one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub frame: u64,
    pub lane: Option<LaneOverlay>,
    pub objects: Vec<ObjectAnnotation>,
}

impl AnnotationRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("annotation serializes")
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        serde_json::from_str(line).map_err(|e| Error::Schema(format!("annotation: {e}")))
    }
}

/// Single-owner JSON-lines sink for annotation records.
pub struct AnnotationWriter<W: Write> {
    out: W,
    path: PathBuf,
}

impl AnnotationWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            out: BufWriter::new(file),
            path: path.to_path_buf(),
        })
    }
}

impl<W: Write> AnnotationWriter<W> {
    pub fn new(out: W) -> Self {
        Self {
            out,
            path: PathBuf::from("<annotations>"),
        }
    }

    pub fn write(&mut self, record: &AnnotationRecord) -> Result<()> {
        writeln!(self.out, "{}", record.to_json_line()).map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.out)
    }
}
