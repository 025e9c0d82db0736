//! 8-bit raster images and binary netpbm (P5/P6) encoding.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// A row-major grid of 8-bit samples with one (gray) or three (RGB) channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Raster {
    /// Wraps existing sample data, checking that its length matches the
    /// declared dimensions.
    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "raster dimensions must be at least 1x1, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidInput(format!(
                "raster must have 1 or 3 channels, got {channels}"
            )));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(Error::InvalidInput(format!(
                "raster data has {} samples, expected {expected}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// A raster with every sample set to `value`.
    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::from_vec(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds a single-channel raster by evaluating `f(x, y)` at every pixel.
    pub fn from_fn_gray(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::from_vec(width, height, 1, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    /// Sample at (`x`, `y`) in channel `c`. Panics when out of bounds.
    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, value: u8) {
        self.data[(y * self.width + x) * self.channels + c] = value;
    }

    /// Sample at a possibly out-of-range position, clamped to the nearest
    /// edge pixel.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize, c: usize) -> u8 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y, c)
    }

    pub(crate) fn require_gray(&self, stage: &str) -> Result<()> {
        if self.channels != 1 {
            return Err(Error::InvalidInput(format!(
                "{stage} expects a single-channel raster, got {} channels",
                self.channels
            )));
        }
        Ok(())
    }

    /// Decodes a binary PGM (`P5`) or PPM (`P6`) image with maxval 255.
    pub fn decode_pnm(bytes: &[u8]) -> Result<Self> {
        let mut cursor = HeaderCursor { bytes, pos: 0 };
        let magic = cursor.token()?;
        let channels = match magic.as_str() {
            "P5" => 1,
            "P6" => 3,
            other => {
                return Err(Error::InvalidInput(format!(
                    "unsupported netpbm magic {other:?}, expected P5 or P6"
                )))
            }
        };
        let width = cursor.number()?;
        let height = cursor.number()?;
        let maxval = cursor.number()?;
        if maxval != 255 {
            return Err(Error::InvalidInput(format!(
                "only maxval 255 is supported, got {maxval}"
            )));
        }
        // exactly one whitespace byte separates the header from the samples
        cursor.pos += 1;
        let expected = width * height * channels;
        let body = bytes.get(cursor.pos..).unwrap_or_default();
        if body.len() < expected {
            return Err(Error::InvalidInput(format!(
                "truncated netpbm data: {} of {expected} samples",
                body.len()
            )));
        }
        Self::from_vec(width, height, channels, body[..expected].to_vec())
    }

    /// Encodes as `P5` (gray) or `P6` (RGB).
    pub fn encode_pnm(&self) -> Vec<u8> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn read_pnm(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode_pnm(&bytes).map_err(|e| match e {
            Error::InvalidInput(msg) => Error::InvalidInput(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn write_pnm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.encode_pnm()).map_err(|e| Error::io(path, e))
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<String> {
        self.skip_space_and_comments();
        let start = self.pos;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() || b == b'#' {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::InvalidInput("truncated netpbm header".into()));
        }
        Ok(String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned())
    }

    fn number(&mut self) -> Result<usize> {
        let tok = self.token()?;
        tok.parse()
            .map_err(|_| Error::InvalidInput(format!("bad netpbm header field {tok:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_length_mismatch() {
        assert!(Raster::from_vec(2, 2, 1, vec![0; 3]).is_err());
        assert!(Raster::from_vec(2, 2, 2, vec![0; 8]).is_err());
        assert!(Raster::from_vec(0, 2, 1, vec![]).is_err());
    }

    #[test]
    fn pnm_with_comments() {
        let mut bytes = b"P5\n# made by hand\n3 2\n# another\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3, 4, 5, 6]);
        let r = Raster::decode_pnm(&bytes).unwrap();
        assert_eq!((r.width(), r.height(), r.channels()), (3, 2, 1));
        assert_eq!(r.get(2, 1, 0), 6);
    }

    #[test]
    fn ppm_roundtrip() {
        let r = Raster::from_vec(2, 1, 3, vec![10, 20, 30, 40, 50, 60]).unwrap();
        let back = Raster::decode_pnm(&r.encode_pnm()).unwrap();
        assert_eq!(r, back);
    }

    #[test]
    fn rejects_other_maxval_and_truncation() {
        assert!(Raster::decode_pnm(b"P5 1 1 65535\n\0\0").is_err());
        assert!(Raster::decode_pnm(b"P5 2 2 255\n\0").is_err());
        assert!(Raster::decode_pnm(b"P2 1 1 255\n0").is_err());
    }
}
