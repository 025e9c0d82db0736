use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::behavior::Direction;
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 10] = [
    "Frame",
    "Object ID",
    "Class",
    "Cx",
    "Cy",
    "Avg. Lateral",
    "Off-Center",
    "Direction",
    "Sign Change",
    "Alarms",
];

/// One row of the behavior log.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorRecord {
    pub frame: u64,
    pub object_id: u64,
    pub class_label: String,
    pub cx: i64,
    pub cy: i64,
    /// Magnitude of the windowed lateral mean, px/frame.
    pub avg_lateral: f64,
    /// Rounded off-center magnitude; `None` without a lane reference.
    pub off_center: Option<i64>,
    pub direction: Direction,
    pub sign_change: usize,
    /// Empty when no alarm is active.
    pub alarms: String,
}

/// Two-decimal magnitude; the sign is carried by the Direction column.
/// `trim` drops trailing zeros and a bare point.
pub fn format_avg_lateral(value: f64, trim: bool) -> String {
    let s = format!("{:.2}", value.abs());
    if !trim {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Single-owner CSV sink. Rows must arrive ordered by `(frame, object_id)`.
pub struct CsvWriter<W: Write> {
    inner: csv::Writer<W>,
    trim_zeros: bool,
    last_key: Option<(u64, u64)>,
    path: PathBuf,
}

impl CsvWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>, trim_zeros: bool) -> Result<Self> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Self::with_path(BufWriter::new(file), trim_zeros, path)
    }
}

impl<W: Write> CsvWriter<W> {
    pub fn new(out: W, trim_zeros: bool) -> Result<Self> {
        Self::with_path(out, trim_zeros, Path::new("<csv>"))
    }

    fn with_path(out: W, trim_zeros: bool, path: &Path) -> Result<Self> {
        let inner = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let mut w = Self {
            inner,
            trim_zeros,
            last_key: None,
            path: path.to_path_buf(),
        };
        w.inner.write_record(CSV_HEADER).map_err(|e| w.err(e))?;
        Ok(w)
    }

    fn err(&self, e: csv::Error) -> Error {
        Error::io(&self.path, std::io::Error::other(e))
    }

    pub fn write(&mut self, r: &BehaviorRecord) -> Result<()> {
        let key = (r.frame, r.object_id);
        if self.last_key.is_some_and(|last| key <= last) {
            return Err(Error::InvalidInput(format!(
                "behavior rows out of order: ({}, {}) after {:?}",
                r.frame, r.object_id, self.last_key
            )));
        }
        self.last_key = Some(key);
        let row = [
            r.frame.to_string(),
            r.object_id.to_string(),
            r.class_label.clone(),
            r.cx.to_string(),
            r.cy.to_string(),
            format_avg_lateral(r.avg_lateral, self.trim_zeros),
            r.off_center.map(|v| v.to_string()).unwrap_or_default(),
            r.direction.to_string(),
            r.sign_change.to_string(),
            r.alarms.clone(),
        ];
        self.inner.write_record(&row).map_err(|e| self.err(e))
    }

    /// Flushes and returns the underlying writer.
    pub fn finish(self) -> Result<W> {
        let path = self.path.clone();
        self.inner
            .into_inner()
            .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))
    }
}
