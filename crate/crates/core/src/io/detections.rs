use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::iter::Peekable;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tracking::{BBox, Detection};

/// One line of a detection log.
#[derive(Debug, Serialize, Deserialize)]
struct DetectionLine {
    frame: u64,
    class: String,
    bbox: [f64; 4],
    conf: f64,
}

impl From<&Detection> for DetectionLine {
    fn from(d: &Detection) -> Self {
        Self {
            frame: d.frame,
            class: d.class_label.clone(),
            bbox: d.bbox.as_array(),
            conf: d.confidence,
        }
    }
}

/// Streaming, validating reader over a JSON-lines detection log.
///
/// Blank lines are skipped. A bad line yields an error and reading resumes
/// at the next line; an I/O failure ends the stream.
pub struct DetectionReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    last_frame: Option<u64>,
    done: bool,
}

impl<R: BufRead> DetectionReader<R> {
    pub fn new(reader: R) -> Self {
        Self {
            lines: reader.lines(),
            line_no: 0,
            last_frame: None,
            done: false,
        }
    }

    fn parse(&mut self, text: &str) -> Result<Detection> {
        let line = self.line_no;
        let raw: DetectionLine = serde_json::from_str(text).map_err(|e| {
            use serde_json::error::Category;
            match e.classify() {
                Category::Data => Error::Schema(format!("line {line}: {e}")),
                _ => Error::Parse {
                    line,
                    message: e.to_string(),
                },
            }
        })?;
        let [x, y, w, h] = raw.bbox;
        let det = Detection {
            frame: raw.frame,
            class_label: raw.class,
            bbox: BBox::new(x, y, w, h),
            confidence: raw.conf,
        };
        det.validate()
            .map_err(|e| Error::Schema(format!("line {line}: {e}")))?;
        if let Some(last) = self.last_frame {
            if det.frame < last {
                return Err(Error::Format {
                    line,
                    message: format!("frame {} follows frame {last}", det.frame),
                });
            }
        }
        self.last_frame = Some(det.frame);
        Ok(det)
    }
}

impl<R: BufRead> Iterator for DetectionReader<R> {
    type Item = Result<Detection>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            let text = match self.lines.next()? {
                Ok(t) => t,
                Err(e) => {
                    self.done = true;
                    return Some(Err(Error::io("<detection log>", e)));
                }
            };
            self.line_no += 1;
            if text.trim().is_empty() {
                continue;
            }
            return Some(self.parse(&text));
        }
        None
    }
}

pub fn open_detection_log(path: impl AsRef<Path>) -> Result<DetectionReader<BufReader<File>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(DetectionReader::new(BufReader::new(file)))
}

/// Reads a whole log, stopping at the first invalid line.
pub fn read_detection_log(path: impl AsRef<Path>) -> Result<Vec<Detection>> {
    open_detection_log(path)?.collect()
}

/// Writes detections as JSON lines in the order given.
pub fn write_detection_log<W: Write>(mut out: W, detections: &[Detection]) -> std::io::Result<()> {
    for d in detections {
        serde_json::to_writer(&mut out, &DetectionLine::from(d))?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Groups a frame-ordered detection stream into per-frame batches.
///
/// Errors from the underlying stream are passed through individually.
pub struct FrameBatches<I: Iterator<Item = Result<Detection>>> {
    inner: Peekable<I>,
}

impl<I: Iterator<Item = Result<Detection>>> FrameBatches<I> {
    pub fn new(inner: I) -> Self {
        Self {
            inner: inner.peekable(),
        }
    }
}

impl<I: Iterator<Item = Result<Detection>>> Iterator for FrameBatches<I> {
    type Item = Result<(u64, Vec<Detection>)>;

    fn next(&mut self) -> Option<Self::Item> {
        let first = match self.inner.next()? {
            Ok(d) => d,
            Err(e) => return Some(Err(e)),
        };
        let frame = first.frame;
        let mut batch = vec![first];
        while let Some(Ok(d)) = self.inner.peek() {
            if d.frame != frame {
                break;
            }
            batch.extend(self.inner.next().and_then(|r| r.ok()));
        }
        Some(Ok((frame, batch)))
    }
}
