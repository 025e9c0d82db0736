//! Preprocessing stages that turn a camera frame into a binary edge map.
//!
//! The stages run in a fixed order: grayscale conversion, Gaussian blur,
//! adaptive thresholding, Canny edge detection and finally masking with the
//! road region of interest. Every stage is a pure function of its inputs and
//! uses edge replication at the image border.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Raster;

/// Converts an RGB frame to 8-bit luma using the ITU-R BT.601 weights.
pub fn to_grayscale(frame: &Raster) -> Result<Raster> {
    if frame.channels() != 3 {
        return Err(Error::InvalidInput(format!(
            "grayscale conversion expects 3 channels, got {}",
            frame.channels()
        )));
    }
    let data = frame
        .data()
        .chunks_exact(3)
        .map(|px| {
            let luma = 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64;
            luma.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    Raster::from_vec(frame.width(), frame.height(), 1, data)
}

/// Normalized 1-D Gaussian weights for an odd `size`.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Result<Vec<f64>> {
    if size < 3 || size.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!(
            "blur kernel size must be odd and >= 3, got {size}"
        )));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidConfig(format!("blur sigma must be > 0, got {sigma}")));
    }
    let r = (size / 2) as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= sum);
    Ok(k)
}

/// Separable Gaussian blur of a gray raster.
pub fn gaussian_blur(img: &Raster, kernel_size: usize, sigma: f64) -> Result<Raster> {
    img.require_gray("gaussian blur")?;
    let kernel = gaussian_kernel(kernel_size, sigma)?;
    let (w, h) = (img.width(), img.height());
    let r = (kernel_size / 2) as isize;

    let src = img.data();
    let mut horizontal = vec![0.0f64; w * h];
    let mut padded = vec![0.0f64; w + 2 * r as usize];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for (i, p) in padded.iter_mut().enumerate() {
            *p = row[(i as isize - r).clamp(0, w as isize - 1) as usize] as f64;
        }
        for (x, out) in horizontal[y * w..(y + 1) * w].iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, weight) in kernel.iter().enumerate() {
                acc += weight * padded[x + k];
            }
            *out = acc;
        }
    }

    let mut out = vec![0u8; w * h];
    let mut acc = vec![0.0f64; w];
    for y in 0..h {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for (k, weight) in kernel.iter().enumerate() {
            let sy = (y as isize + k as isize - r).clamp(0, h as isize - 1) as usize;
            for (a, &v) in acc.iter_mut().zip(&horizontal[sy * w..(sy + 1) * w]) {
                *a += weight * v;
            }
        }
        for (o, a) in out[y * w..(y + 1) * w].iter_mut().zip(&acc) {
            *o = a.round().clamp(0.0, 255.0) as u8;
        }
    }
    Raster::from_vec(w, h, 1, out)
}

/// Mean-based adaptive threshold: a pixel becomes 255 when its value exceeds
/// the mean of its `block`x`block` neighborhood minus `c`, and 0 otherwise.
pub fn adaptive_threshold(img: &Raster, block: usize, c: i32) -> Result<Raster> {
    img.require_gray("adaptive threshold")?;
    if block < 3 || block.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!(
            "threshold block must be odd and >= 3, got {block}"
        )));
    }
    let (w, h) = (img.width(), img.height());
    let r = (block / 2) as isize;

    let src = img.data();
    let clamp_x = |x: isize| x.clamp(0, w as isize - 1) as usize;
    let clamp_y = |y: isize| y.clamp(0, h as isize - 1) as usize;

    // sliding box sums; exact in integers
    let mut row_sums = vec![0i64; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        let mut sum: i64 = (-r..=r).map(|dx| row[clamp_x(dx)] as i64).sum();
        for x in 0..w {
            row_sums[y * w + x] = sum;
            let xi = x as isize;
            sum += row[clamp_x(xi + r + 1)] as i64 - row[clamp_x(xi - r)] as i64;
        }
    }
    let mut col_sums = vec![0i64; w];
    for dy in -r..=r {
        let sy = clamp_y(dy);
        for (c, &v) in col_sums.iter_mut().zip(&row_sums[sy * w..(sy + 1) * w]) {
            *c += v;
        }
    }

    let n = (block * block) as i64;
    let mut out = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            // value > sum / n - c, compared without division
            let value = src[y * w + x] as i64;
            if value * n > col_sums[x] - c as i64 * n {
                out[y * w + x] = 255;
            }
        }
        let (add, sub) = (clamp_y(y as isize + r + 1), clamp_y(y as isize - r));
        for x in 0..w {
            col_sums[x] += row_sums[add * w + x] - row_sums[sub * w + x];
        }
    }
    Raster::from_vec(w, h, 1, out)
}

/// Largest accepted Canny threshold.
pub const CANNY_MAX_THRESHOLD: u32 = 255 * 4;

/// Sobel gradients of a gray raster with replicated borders.
pub fn sobel(img: &Raster) -> Result<(Vec<i32>, Vec<i32>)> {
    img.require_gray("sobel")?;
    let (w, h) = (img.width(), img.height());
    let src = img.data();
    let mut gx = vec![0i32; w * h];
    let mut gy = vec![0i32; w * h];
    for y in 0..h {
        let row = |yy: usize| &src[yy * w..(yy + 1) * w];
        let (up, mid, down) = (row(y.saturating_sub(1)), row(y), row((y + 1).min(h - 1)));
        for x in 0..w {
            let (l, r) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let p = |row: &[u8], i: usize| row[i] as i32;
            gx[y * w + x] = (p(up, r) + 2 * p(mid, r) + p(down, r)) - (p(up, l) + 2 * p(mid, l) + p(down, l));
            gy[y * w + x] = (p(down, l) + 2 * p(down, x) + p(down, r)) - (p(up, l) + 2 * p(up, x) + p(up, r));
        }
    }
    Ok((gx, gy))
}

/// Unit step along the quantized gradient direction, pointing towards the
/// brighter side.
fn gradient_step(gx: i32, gy: i32) -> (isize, isize) {
    let (ax, ay) = (gx.unsigned_abs() as i64, gy.unsigned_abs() as i64);
    // tan(22.5deg) ~ 0.41421, tan(67.5deg) ~ 2.41421
    if ay * 100_000 <= ax * 41_421 {
        (gx.signum() as isize, 0)
    } else if ay * 100_000 >= ax * 241_421 {
        (0, gy.signum() as isize)
    } else {
        (gx.signum() as isize, gy.signum() as isize)
    }
}

/// Canny edge detector on the L1 Sobel magnitude.
///
/// Non-maximum suppression compares each pixel with its two neighbors along
/// the quantized gradient. Ties on a two-pixel plateau resolve to the pixel
/// on the brighter side, so a binary step yields exactly one edge pixel per
/// row (or column) and it lies on the bright region. Hysteresis keeps pixels
/// at or above `high` plus pixels at or above `low` that are 8-connected to
/// a kept pixel.
pub fn canny(img: &Raster, low: u32, high: u32) -> Result<Raster> {
    img.require_gray("canny")?;
    if low >= high {
        return Err(Error::InvalidConfig(format!(
            "canny low threshold ({low}) must be below high ({high})"
        )));
    }
    if high > CANNY_MAX_THRESHOLD {
        return Err(Error::InvalidConfig(format!(
            "canny high threshold must be <= {CANNY_MAX_THRESHOLD}, got {high}"
        )));
    }
    let (w, h) = (img.width(), img.height());
    let (gx, gy) = sobel(img)?;
    let mag: Vec<u32> = gx
        .iter()
        .zip(&gy)
        .map(|(a, b)| a.unsigned_abs() + b.unsigned_abs())
        .collect();
    let mag_at = |x: isize, y: isize| -> u32 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0
        } else {
            mag[y as usize * w + x as usize]
        }
    };

    let mut thin = vec![0u32; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let m = mag[i];
            if m == 0 {
                continue;
            }
            let (sx, sy) = gradient_step(gx[i], gy[i]);
            let ahead = mag_at(x as isize + sx, y as isize + sy);
            let behind = mag_at(x as isize - sx, y as isize - sy);
            if m > ahead && m >= behind {
                thin[i] = m;
            }
        }
    }

    let mut out = vec![0u8; w * h];
    let mut stack: Vec<usize> = Vec::new();
    for (i, &m) in thin.iter().enumerate() {
        if m >= high && out[i] == 0 {
            out[i] = 255;
            stack.push(i);
            while let Some(j) = stack.pop() {
                let (jx, jy) = ((j % w) as isize, (j / w) as isize);
                for dy in -1..=1isize {
                    for dx in -1..=1isize {
                        let (nx, ny) = (jx + dx, jy + dy);
                        if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                            continue;
                        }
                        let k = ny as usize * w + nx as usize;
                        if out[k] == 0 && thin[k] > 0 && thin[k] >= low {
                            out[k] = 255;
                            stack.push(k);
                        }
                    }
                }
            }
        }
    }
    Raster::from_vec(w, h, 1, out)
}

/// Polygonal region of interest in normalized frame coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct RoiPolygon {
    vertices: Vec<[f64; 2]>,
}

impl RoiPolygon {
    /// Validates a simple polygon with at least three vertices inside the
    /// unit square and non-zero area.
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidConfig(format!(
                "roi needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        for v in &vertices {
            if !v.iter().all(|c| c.is_finite() && (0.0..=1.0).contains(c)) {
                return Err(Error::InvalidConfig(format!(
                    "roi vertex {v:?} is outside the normalized [0, 1] frame"
                )));
            }
        }
        let n = vertices.len();
        let twice_area: f64 = (0..n)
            .map(|i| {
                let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                a[0] * b[1] - b[0] * a[1]
            })
            .sum();
        if twice_area.abs() < 1e-12 {
            return Err(Error::InvalidConfig("roi polygon has zero area".into()));
        }
        for i in 0..n {
            for j in i + 1..n {
                // adjacent edges share a vertex
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                let (c, d) = (vertices[j], vertices[(j + 1) % n]);
                if segments_intersect(a, b, c, d) {
                    return Err(Error::InvalidConfig(format!(
                        "roi polygon is self-intersecting (edges {i} and {j})"
                    )));
                }
            }
        }
        Ok(Self { vertices })
    }

    /// The whole frame.
    pub fn full_frame() -> Self {
        Self {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        }
    }

    /// Forward-road trapezoid: full width along the bottom edge, 45% of the
    /// width centered at 60% of the frame height.
    pub fn road_trapezoid() -> Self {
        Self {
            vertices: vec![[0.0, 1.0], [0.275, 0.6], [0.725, 0.6], [1.0, 1.0]],
        }
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    /// Edge crossings of the horizontal line `py`, in raster pixels.
    fn crossings(&self, py: f64, sw: f64, sh: f64, out: &mut Vec<f64>) {
        out.clear();
        let n = self.vertices.len();
        for i in 0..n {
            let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
            let (ax, ay, bx, by) = (a[0] * sw, a[1] * sh, b[0] * sw, b[1] * sh);
            if (ay > py) != (by > py) {
                out.push(ax + (py - ay) * (bx - ax) / (by - ay));
            }
        }
    }

    /// Even-odd membership of the pixel center (`x` + 0.5, `y` + 0.5) for a
    /// raster of the given size.
    pub fn contains_pixel(&self, x: usize, y: usize, width: usize, height: usize) -> bool {
        let mut xs = Vec::new();
        self.crossings(y as f64 + 0.5, width as f64, height as f64, &mut xs);
        let px = x as f64 + 0.5;
        xs.iter().filter(|&&xi| xi > px).count() % 2 == 1
    }

    /// Row-major membership mask for a raster of the given size; agrees
    /// with [`RoiPolygon::contains_pixel`] at every pixel.
    pub fn mask(&self, width: usize, height: usize) -> Vec<bool> {
        let mut m = Vec::with_capacity(width * height);
        let mut xs = Vec::new();
        for y in 0..height {
            self.crossings(y as f64 + 0.5, width as f64, height as f64, &mut xs);
            xs.sort_by(f64::total_cmp);
            // xs[first_right..] lie strictly right of the pixel center
            let mut first_right = 0;
            for x in 0..width {
                let px = x as f64 + 0.5;
                while first_right < xs.len() && xs[first_right] <= px {
                    first_right += 1;
                }
                m.push((xs.len() - first_right) % 2 == 1);
            }
        }
        m
    }
}

impl TryFrom<Vec<[f64; 2]>> for RoiPolygon {
    type Error = Error;

    fn try_from(v: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<RoiPolygon> for Vec<[f64; 2]> {
    fn from(r: RoiPolygon) -> Self {
        r.vertices
    }
}

fn orientation(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

fn segments_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let (o1, o2) = (orientation(a, b, c), orientation(a, b, d));
    let (o3, o4) = (orientation(c, d, a), orientation(c, d, b));
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0)) && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0)) {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// Zeroes every pixel outside `roi`.
pub fn apply_roi(img: &Raster, roi: &RoiPolygon) -> Result<Raster> {
    img.require_gray("roi mask")?;
    let (w, h) = (img.width(), img.height());
    let mask = roi.mask(w, h);
    let data = img
        .data()
        .iter()
        .zip(mask)
        .map(|(&v, keep)| if keep { v } else { 0 })
        .collect();
    Raster::from_vec(w, h, 1, data)
}

/// Parameters of the full edge-map chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImagingParams {
    pub blur_kernel: usize,
    pub blur_sigma: f64,
    pub threshold_block: usize,
    pub threshold_c: i32,
    pub canny_low: u32,
    pub canny_high: u32,
    pub roi: RoiPolygon,
}

impl Default for ImagingParams {
    fn default() -> Self {
        Self {
            blur_kernel: 5,
            blur_sigma: 1.4,
            threshold_block: 15,
            threshold_c: -5,
            canny_low: 50,
            canny_high: 150,
            roi: RoiPolygon::road_trapezoid(),
        }
    }
}

impl ImagingParams {
    pub fn validate(&self) -> Result<()> {
        gaussian_kernel(self.blur_kernel, self.blur_sigma)?;
        if self.threshold_block < 3 || self.threshold_block.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "threshold block must be odd and >= 3, got {}",
                self.threshold_block
            )));
        }
        if self.canny_low >= self.canny_high || self.canny_high > CANNY_MAX_THRESHOLD {
            return Err(Error::InvalidConfig(format!(
                "canny thresholds must satisfy low < high <= {CANNY_MAX_THRESHOLD}, got {} / {}",
                self.canny_low, self.canny_high
            )));
        }
        RoiPolygon::new(self.roi.vertices.clone()).map(|_| ())
    }
}

/// Runs grayscale (for RGB input), blur, threshold, Canny and ROI masking.
pub fn edge_map(frame: &Raster, params: &ImagingParams) -> Result<Raster> {
    let gray = match frame.channels() {
        3 => to_grayscale(frame)?,
        _ => frame.clone(),
    };
    let blurred = gaussian_blur(&gray, params.blur_kernel, params.blur_sigma)?;
    let binary = adaptive_threshold(&blurred, params.threshold_block, params.threshold_c)?;
    let edges = canny(&binary, params.canny_low, params.canny_high)?;
    apply_roi(&edges, &params.roi)
}
