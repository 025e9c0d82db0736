use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// `frame_%06d.<ext>`.
pub fn frame_file_name(frame: u64, ext: &str) -> String {
    format!("frame_{frame:06}.{ext}")
}

fn parse_frame_name(name: &str) -> Option<u64> {
    let stem = name
        .strip_suffix(".pgm")
        .or_else(|| name.strip_suffix(".ppm"))?
        .strip_prefix("frame_")?;
    if stem.len() < 6 || !stem.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    stem.parse().ok()
}

/// Lists `frame_NNNNNN.pgm|ppm` files in `dir`, sorted by frame index.
/// Other files are ignored; two files for one index are an error.
pub fn list_frames(dir: impl AsRef<Path>) -> Result<Vec<(u64, PathBuf)>> {
    let dir = dir.as_ref();
    let mut frames = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        if let Some(frame) = name.to_str().and_then(parse_frame_name) {
            frames.push((frame, entry.path()));
        }
    }
    frames.sort();
    if let Some(w) = frames.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidInput(format!(
            "two images for frame {}: {} and {}",
            w[0].0,
            w[0].1.display(),
            w[1].1.display()
        )));
    }
    Ok(frames)
}
