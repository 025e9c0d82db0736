//! Lane boundary estimation.
//!
//! Lane boundaries are modelled as polynomials `x(y) = a*y^2 + b*y + c` in
//! pixel units, parameterized by image row so near-vertical markings stay
//! well conditioned. Boundaries are fitted with RANSAC on the edge pixels of
//! each half of the frame; the centerline is the coefficient-wise mean of the
//! two boundaries.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::RoiPolygon;
use crate::raster::Raster;

/// Edge pixel coordinates `[x, y]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgePointSet {
    pub points: Vec<[f64; 2]>,
}

impl EdgePointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Collects the nonzero pixels of `edges` inside `roi`, split at the vertical
/// midline. Pixels with `x < width / 2` go left, the rest (including the
/// midline itself) go right.
pub fn extract_edge_points(edges: &Raster, roi: &RoiPolygon) -> Result<(EdgePointSet, EdgePointSet)> {
    edges.require_gray("edge point extraction")?;
    let (w, h) = (edges.width(), edges.height());
    let mid = w as f64 / 2.0;
    let mut left = EdgePointSet::default();
    let mut right = EdgePointSet::default();
    for y in 0..h {
        for x in 0..w {
            if edges.get(x, y, 0) == 0 || !roi.contains_pixel(x, y, w, h) {
                continue;
            }
            let p = [x as f64, y as f64];
            if (x as f64) < mid {
                left.points.push(p);
            } else {
                right.points.push(p);
            }
        }
    }
    Ok((left, right))
}

/// A boundary or centerline curve `x(y) = a*y^2 + b*y + c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanePolynomial {
    pub coeffs: [f64; 3],
    pub inlier_count: usize,
    /// Row range `[y_min, y_max]` over which the curve is valid.
    pub domain: [f64; 2],
}

impl LanePolynomial {
    pub fn new(coeffs: [f64; 3], domain: [f64; 2]) -> Result<Self> {
        let p = Self {
            coeffs,
            inlier_count: 0,
            domain,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.coeffs.iter().all(|c| c.is_finite()) {
            return Err(Error::Geometry(format!("non-finite lane coefficients {:?}", self.coeffs)));
        }
        let [lo, hi] = self.domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Geometry(format!("empty lane domain [{lo}, {hi}]")));
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, y: f64) -> f64 {
        let [a, b, c] = self.coeffs;
        (a * y + b) * y + c
    }

    /// Integer rows inside the domain.
    pub fn rows(&self) -> impl Iterator<Item = f64> {
        let lo = self.domain[0].ceil() as i64;
        let hi = self.domain[1].floor() as i64;
        (lo..=hi).map(|y| y as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansacParams {
    pub degree: usize,
    pub iterations: usize,
    pub inlier_tol: f64,
    pub min_inlier_frac: f64,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            degree: 2,
            iterations: 200,
            inlier_tol: 2.0,
            min_inlier_frac: 0.3,
            seed: 0,
        }
    }
}

impl RansacParams {
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.degree) {
            return Err(Error::InvalidConfig(format!("lane degree must be 1 or 2, got {}", self.degree)));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("ransac iterations must be >= 1".into()));
        }
        if !(self.inlier_tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "ransac inlier tolerance must be > 0, got {}",
                self.inlier_tol
            )));
        }
        if !(0.0..=1.0).contains(&self.min_inlier_frac) {
            return Err(Error::InvalidConfig(format!(
                "ransac min inlier fraction must lie in [0, 1], got {}",
                self.min_inlier_frac
            )));
        }
        Ok(())
    }
}

/// Least-squares fit of `x(y)` of the given degree. Returns `None` when the
/// rows do not determine the polynomial.
pub fn least_squares_poly(points: &[[f64; 2]], degree: usize) -> Option<[f64; 3]> {
    let n_coef = degree + 1;
    if points.len() < n_coef {
        return None;
    }
    // fit in a centered, scaled row variable t = (y - m) / s for conditioning
    let m = points.iter().map(|p| p[1]).sum::<f64>() / points.len() as f64;
    let s = points.iter().map(|p| (p[1] - m).abs()).fold(0.0, f64::max).max(1.0);

    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for p in points {
        let t = (p[1] - m) / s;
        let basis = [1.0, t, t * t];
        for i in 0..n_coef {
            atb[i] += basis[i] * p[0];
            for j in 0..n_coef {
                ata[i][j] += basis[i] * basis[j];
            }
        }
    }
    let sol = solve(&mut ata, &mut atb, n_coef)?;
    let (c0, c1, c2) = (sol[0], sol[1], if degree == 2 { sol[2] } else { 0.0 });

    // back to the raw row variable
    let a = c2 / (s * s);
    let b = c1 / s - 2.0 * c2 * m / (s * s);
    let c = c0 - c1 * m / s + c2 * m * m / (s * s);
    let coeffs = [a, b, c];
    coeffs.iter().all(|v| v.is_finite()).then_some(coeffs)
}

/// Gaussian elimination with partial pivoting on the leading `n`x`n` block.
fn solve(a: &mut [[f64; 3]; 3], b: &mut [f64; 3], n: usize) -> Option<[f64; 3]> {
    let scale = (0..n).map(|i| a[i][i].abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-10 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            let (top, rest) = a.split_at_mut(row);
            for (t, &p) in rest[0][col..n].iter_mut().zip(&top[col][col..n]) {
                *t -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

fn eval_coeffs(c: &[f64; 3], y: f64) -> f64 {
    (c[0] * y + c[1]) * y + c[2]
}

fn inliers(points: &[[f64; 2]], coeffs: &[f64; 3], tol: f64) -> Vec<usize> {
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| (p[0] - eval_coeffs(coeffs, p[1])).abs() <= tol)
        .map(|(i, _)| i)
        .collect()
}

/// Robust polynomial fit of `x(y)`.
///
/// Each iteration fits the minimal sample of `degree + 1` distinct points and
/// scores it by the number of points within `inlier_tol` horizontally. The
/// best-scoring hypothesis (first found on ties) is refitted by least squares
/// on its inliers. Returns `Ok(None)` when there are too few points, when no
/// hypothesis is well posed, or when the consensus set is smaller than
/// `min_inlier_frac` of the input.
pub fn ransac_polyfit(points: &EdgePointSet, params: &RansacParams) -> Result<Option<LanePolynomial>> {
    params.validate()?;
    let pts = &points.points;
    let k = params.degree + 1;
    if pts.len() < k {
        return Ok(None);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<Vec<usize>> = None;
    let mut sample = Vec::with_capacity(k);
    for _ in 0..params.iterations {
        sample.clear();
        sample.extend(rand::seq::index::sample(&mut rng, pts.len(), k).iter().map(|i| pts[i]));
        let Some(coeffs) = least_squares_poly(&sample, params.degree) else {
            continue;
        };
        let set = inliers(pts, &coeffs, params.inlier_tol);
        if best.as_ref().is_none_or(|b| set.len() > b.len()) {
            best = Some(set);
        }
    }
    let Some(best) = best else {
        return Ok(None);
    };
    if (best.len() as f64) < params.min_inlier_frac * pts.len() as f64 {
        return Ok(None);
    }
    let support: Vec<[f64; 2]> = best.iter().map(|&i| pts[i]).collect();
    let Some(coeffs) = least_squares_poly(&support, params.degree) else {
        return Ok(None);
    };
    let lo = support.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
    let hi = support.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
    if !(lo < hi) {
        return Ok(None);
    }
    Ok(Some(LanePolynomial {
        coeffs,
        inlier_count: support.len(),
        domain: [lo, hi],
    }))
}

/// Left and right boundaries plus the derived centerline for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneModel {
    pub left: LanePolynomial,
    pub right: LanePolynomial,
    pub center: LanePolynomial,
    pub frame: u64,
}

/// Combines two boundaries into a lane. The centerline coefficients are the
/// mean of the boundary coefficients over the intersection of their domains.
/// Fails when the domains do not overlap or the boundaries touch or cross.
pub fn build_lane_model(left: LanePolynomial, right: LanePolynomial, frame: u64) -> Result<LaneModel> {
    left.validate()?;
    right.validate()?;
    let lo = left.domain[0].max(right.domain[0]);
    let hi = left.domain[1].min(right.domain[1]);
    if !(lo < hi) {
        return Err(Error::Geometry(format!(
            "lane boundaries do not overlap (left {:?}, right {:?})",
            left.domain, right.domain
        )));
    }
    let rows = (lo.ceil() as i64..=hi.floor() as i64).map(|y| y as f64);
    for y in [lo, hi].into_iter().chain(rows) {
        if left.eval(y) >= right.eval(y) {
            return Err(Error::Geometry(format!(
                "lane boundaries cross at row {y}: left {:.2} >= right {:.2}",
                left.eval(y),
                right.eval(y)
            )));
        }
    }
    let center = LanePolynomial {
        coeffs: std::array::from_fn(|i| (left.coeffs[i] + right.coeffs[i]) / 2.0),
        inlier_count: left.inlier_count.min(right.inlier_count),
        domain: [lo, hi],
    };
    Ok(LaneModel {
        left,
        right,
        center,
        frame,
    })
}

/// Exponential smoothing of lane coefficients.
///
/// With both models present the boundaries become
/// `alpha * current + (1 - alpha) * previous` over the current domain. A
/// missing side passes the other through unchanged. If the blended
/// boundaries cross, the current model wins.
pub fn smooth_lane_model(previous: Option<&LaneModel>, current: Option<&LaneModel>, alpha: f64) -> Option<LaneModel> {
    debug_assert!(alpha > 0.0 && alpha <= 1.0);
    match (previous, current) {
        (None, None) => None,
        (Some(p), None) => Some(p.clone()),
        (None, Some(c)) => Some(c.clone()),
        (Some(p), Some(c)) => {
            let blend = |cur: &LanePolynomial, prev: &LanePolynomial| LanePolynomial {
                coeffs: std::array::from_fn(|i| alpha * cur.coeffs[i] + (1.0 - alpha) * prev.coeffs[i]),
                inlier_count: cur.inlier_count,
                domain: cur.domain,
            };
            build_lane_model(blend(&c.left, &p.left), blend(&c.right, &p.right), c.frame)
                .ok()
                .or_else(|| Some(c.clone()))
        }
    }
}

/// Stateful smoothing with a bounded carry-forward of the last model when
/// detection fails.
#[derive(Debug, Clone)]
pub struct LaneSmoother {
    alpha: f64,
    max_carry: u32,
    last: Option<LaneModel>,
    missing: u32,
}

impl LaneSmoother {
    pub fn new(alpha: f64, max_carry: u32) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!("smoothing alpha must lie in (0, 1], got {alpha}")));
        }
        Ok(Self {
            alpha,
            max_carry,
            last: None,
            missing: 0,
        })
    }

    /// Feeds this frame's estimate (if any) and returns the model to use.
    pub fn update(&mut self, current: Option<LaneModel>) -> Option<LaneModel> {
        match current {
            Some(c) => {
                self.last = smooth_lane_model(self.last.as_ref(), Some(&c), self.alpha);
                self.missing = 0;
                self.last.clone()
            }
            None => {
                self.missing += 1;
                if self.missing > self.max_carry {
                    self.last = None;
                }
                self.last.clone()
            }
        }
    }
}

/// How the distance between a centroid and the centerline is measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OffCenterMode {
    /// Closest point of the centerline sampled at every row of its domain.
    #[default]
    Euclidean,
    /// Horizontal offset at the centroid's row (clamped to the domain).
    Horizontal,
}

/// Signed distance from a centroid to the lane centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffCenter {
    /// Positive when the centroid lies right of the centerline.
    pub distance: f64,
    /// The centerline point the distance was measured to.
    pub closest: [f64; 2],
}

impl OffCenter {
    pub fn magnitude(&self) -> f64 {
        self.distance.abs()
    }
}

/// Euclidean off-center distance, see [`off_center_with_mode`].
pub fn off_center_distance(model: &LaneModel, centroid: [f64; 2]) -> Result<OffCenter> {
    off_center_with_mode(model, centroid, OffCenterMode::Euclidean)
}

pub fn off_center_with_mode(model: &LaneModel, centroid: [f64; 2], mode: OffCenterMode) -> Result<OffCenter> {
    let center = &model.center;
    center.validate()?;
    let [cx, cy] = centroid;
    let closest = match mode {
        OffCenterMode::Euclidean => {
            let mut best: Option<([f64; 2], f64)> = None;
            for y in center.rows() {
                let p = [center.eval(y), y];
                let d2 = (p[0] - cx).powi(2) + (p[1] - cy).powi(2);
                if best.is_none_or(|(_, b)| d2 < b) {
                    best = Some((p, d2));
                }
            }
            best.ok_or_else(|| Error::Geometry(format!("centerline domain {:?} holds no pixel row", center.domain)))?
                .0
        }
        OffCenterMode::Horizontal => {
            let y = cy.clamp(center.domain[0], center.domain[1]);
            [center.eval(y), y]
        }
    };
    let magnitude = ((closest[0] - cx).powi(2) + (closest[1] - cy).powi(2)).sqrt();
    let distance = if cx < closest[0] { -magnitude } else { magnitude };
    Ok(OffCenter { distance, closest })
}

/// Lane estimation and smoothing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaneParams {
    pub degree: usize,
    pub ransac_iterations: usize,
    pub inlier_tol: f64,
    pub min_inlier_frac: f64,
    pub seed: u64,
    pub alpha: f64,
    pub max_carry: u32,
    pub offcenter_mode: OffCenterMode,
}

impl Default for LaneParams {
    fn default() -> Self {
        let r = RansacParams::default();
        Self {
            degree: r.degree,
            ransac_iterations: r.iterations,
            inlier_tol: r.inlier_tol,
            min_inlier_frac: r.min_inlier_frac,
            seed: r.seed,
            alpha: 0.4,
            max_carry: 15,
            offcenter_mode: OffCenterMode::Euclidean,
        }
    }
}

impl LaneParams {
    pub fn ransac(&self) -> RansacParams {
        RansacParams {
            degree: self.degree,
            iterations: self.ransac_iterations,
            inlier_tol: self.inlier_tol,
            min_inlier_frac: self.min_inlier_frac,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ransac().validate()?;
        LaneSmoother::new(self.alpha, self.max_carry).map(|_| ())
    }
}

/// Fits both boundaries on an edge map. Returns `Ok(None)` when either side
/// has no acceptable fit or the fits do not form a valid lane.
pub fn estimate_lane(edges: &Raster, roi: &RoiPolygon, params: &RansacParams, frame: u64) -> Result<Option<LaneModel>> {
    let (left_pts, right_pts) = extract_edge_points(edges, roi)?;
    let left = ransac_polyfit(&left_pts, params)?;
    let right_params = RansacParams {
        seed: params.seed.wrapping_add(1),
        ..*params
    };
    let right = ransac_polyfit(&right_pts, &right_params)?;
    Ok(match (left, right) {
        (Some(l), Some(r)) => build_lane_model(l, r, frame).ok(),
        _ => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn vertical(x: f64, domain: [f64; 2]) -> LanePolynomial {
        LanePolynomial::new([0.0, 0.0, x], domain).unwrap()
    }

    fn model(left_x: f64, right_x: f64) -> LaneModel {
        build_lane_model(vertical(left_x, [0.0, 1439.0]), vertical(right_x, [0.0, 1439.0]), 0).unwrap()
    }

    #[test]
    fn extract_splits_at_midline() {
        let empty = Raster::filled(10, 6, 1, 0).unwrap();
        let (l, r) = extract_edge_points(&empty, &RoiPolygon::full_frame()).unwrap();
        assert!(l.is_empty() && r.is_empty());

        let single = Raster::from_fn_gray(10, 6, |x, y| if x == 5 && y == 2 { 255 } else { 0 }).unwrap();
        let (l, r) = extract_edge_points(&single, &RoiPolygon::full_frame()).unwrap();
        assert!(l.is_empty());
        assert_eq!(r.points, vec![[5.0, 2.0]]);
    }

    #[test]
    fn extract_two_lines_membership() {
        let (w, h) = (40, 20);
        let on_left = |x: usize, y: usize| x == 8 + y / 4;
        let on_right = |x: usize, y: usize| x == 30 - y / 5;
        let img = Raster::from_fn_gray(w, h, |x, y| if on_left(x, y) || on_right(x, y) { 255 } else { 0 }).unwrap();
        let (l, r) = extract_edge_points(&img, &RoiPolygon::full_frame()).unwrap();
        let mut expect_left = Vec::new();
        let mut expect_right = Vec::new();
        for y in 0..h {
            for x in 0..w {
                if on_left(x, y) {
                    expect_left.push([x as f64, y as f64]);
                }
                if on_right(x, y) {
                    expect_right.push([x as f64, y as f64]);
                }
            }
        }
        assert_eq!(l.points, expect_left);
        assert_eq!(r.points, expect_right);
    }

    #[test]
    fn extract_respects_roi() {
        let img = Raster::filled(20, 20, 1, 255).unwrap();
        let (l, r) = extract_edge_points(&img, &RoiPolygon::road_trapezoid()).unwrap();
        assert!(l.points.iter().chain(&r.points).all(|p| p[1] >= 12.0));
    }

    #[test]
    fn ransac_exact_line() {
        let pts = EdgePointSet {
            points: (0..50).map(|y| [2.0 * y as f64 + 3.0, y as f64]).collect(),
        };
        let params = RansacParams {
            degree: 1,
            ..Default::default()
        };
        let fit = ransac_polyfit(&pts, &params).unwrap().unwrap();
        assert_eq!(fit.inlier_count, 50);
        let expected = [0.0, 2.0, 3.0];
        for (got, want) in fit.coeffs.iter().zip(expected) {
            assert!((got - want).abs() < 1e-6, "{:?}", fit.coeffs);
        }
        assert_eq!(fit.domain, [0.0, 49.0]);
    }

    #[test]
    fn ransac_exact_parabola_on_large_rows() {
        let truth = [0.001, 0.5, 100.0];
        let pts = EdgePointSet {
            points: (0..1300).step_by(7).map(|y| [eval_coeffs(&truth, y as f64), y as f64]).collect(),
        };
        let fit = ransac_polyfit(&pts, &RansacParams::default()).unwrap().unwrap();
        for (got, want) in fit.coeffs.iter().zip(truth) {
            assert!((got - want).abs() < 1e-6, "{:?}", fit.coeffs);
        }
    }

    #[test]
    fn ransac_underdetermined_and_bad_config() {
        let pts = EdgePointSet {
            points: vec![[1.0, 1.0], [2.0, 2.0]],
        };
        assert_eq!(ransac_polyfit(&pts, &RansacParams::default()).unwrap(), None);
        let bad = RansacParams {
            degree: 3,
            ..Default::default()
        };
        assert!(matches!(ransac_polyfit(&pts, &bad), Err(Error::InvalidConfig(_))));
        let bad = RansacParams {
            iterations: 0,
            ..Default::default()
        };
        assert!(matches!(ransac_polyfit(&pts, &bad), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn ransac_rejects_small_consensus() {
        // four unrelated clusters: no curve explains 30% of them
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = EdgePointSet {
            points: (0..100)
                .map(|_| [rng.random_range(0.0..2560.0), rng.random_range(0.0..1440.0)])
                .collect(),
        };
        assert_eq!(ransac_polyfit(&pts, &RansacParams::default()).unwrap(), None);
    }

    #[test]
    fn ransac_is_deterministic_for_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts = EdgePointSet {
            points: (0..80)
                .map(|i| {
                    if i % 3 == 0 {
                        [rng.random_range(0.0..500.0), rng.random_range(0.0..500.0)]
                    } else {
                        let y = rng.random_range(0.0..500.0);
                        [0.3 * y + 40.0, y]
                    }
                })
                .collect(),
        };
        let p = RansacParams::default();
        assert_eq!(ransac_polyfit(&pts, &p).unwrap(), ransac_polyfit(&pts, &p).unwrap());
    }

    #[test]
    fn ransac_planted_curve_with_outliers() {
        let truth = [0.001, 0.5, 100.0];
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut points: Vec<[f64; 2]> = (0..60)
            .map(|_| {
                let y = rng.random_range(0.0..1300.0);
                [eval_coeffs(&truth, y), y]
            })
            .collect();
        points.extend((0..40).map(|_| [rng.random_range(0.0..2560.0), rng.random_range(0.0..1440.0)]));
        let fit = ransac_polyfit(&EdgePointSet { points }, &RansacParams::default())
            .unwrap()
            .unwrap();
        for y in fit.rows() {
            assert!((fit.eval(y) - eval_coeffs(&truth, y)).abs() < 2.0, "row {y}");
        }
    }

    #[test]
    fn lane_model_examples() {
        let m = model(100.0, 300.0);
        assert_eq!(m.center.coeffs, [0.0, 0.0, 200.0]);

        let l = LanePolynomial::new([0.0, 0.0, 100.0], [0.0, 100.0]).unwrap();
        let r = LanePolynomial::new([0.0, 0.2, 200.0], [0.0, 100.0]).unwrap();
        let m = build_lane_model(l, r, 3).unwrap();
        assert_eq!(m.center.coeffs, [0.0, 0.1, 150.0]);
        assert_eq!(m.frame, 3);

        let same = vertical(150.0, [0.0, 10.0]);
        assert!(matches!(build_lane_model(same.clone(), same, 0), Err(Error::Geometry(_))));
    }

    #[test]
    fn lane_model_domain_intersection_and_crossing() {
        let l = LanePolynomial::new([0.0, 1.0, 0.0], [0.0, 300.0]).unwrap();
        let r = LanePolynomial::new([0.0, 0.0, 200.0], [50.0, 400.0]).unwrap();
        // x_l = y crosses x_r = 200 at y = 200
        assert!(matches!(build_lane_model(l.clone(), r.clone(), 0), Err(Error::Geometry(_))));
        let l = LanePolynomial { domain: [0.0, 150.0], ..l };
        let m = build_lane_model(l, r, 0).unwrap();
        assert_eq!(m.center.domain, [50.0, 150.0]);
        let disjoint = LanePolynomial::new([0.0, 0.0, 500.0], [200.0, 300.0]).unwrap();
        let left = vertical(10.0, [0.0, 100.0]);
        assert!(build_lane_model(left, disjoint, 0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn center_is_equidistant(a in -1e-3f64..1e-3, b in -0.5f64..0.5, c in 0.0f64..1000.0, width in 10.0f64..800.0, db in -0.2f64..0.2) {
            let l = LanePolynomial::new([a, b, c], [0.0, 1000.0]).unwrap();
            let r = LanePolynomial::new([a, b + db * 1e-3, c + width], [0.0, 1000.0]).unwrap();
            if let Ok(m) = build_lane_model(l, r, 0) {
                for y in (0..=1000).step_by(50) {
                    let y = y as f64;
                    let mid = (m.left.eval(y) + m.right.eval(y)) / 2.0;
                    proptest::prop_assert!((m.center.eval(y) - mid).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn smoothing_examples() {
        let m = model(100.0, 300.0);
        assert_eq!(smooth_lane_model(None, Some(&m), 0.4), Some(m.clone()));

        let prev = model(50.0, 150.0);
        let cur = model(60.0, 160.0);
        assert_eq!(smooth_lane_model(Some(&prev), Some(&cur), 1.0), Some(cur.clone()));

        let out = smooth_lane_model(Some(&prev), Some(&cur), 0.3).unwrap();
        assert!((out.center.coeffs[2] - 103.0).abs() < 1e-9);
        assert!((out.left.coeffs[2] - 53.0).abs() < 1e-9);
    }

    #[test]
    fn smoother_carries_then_drops() {
        let mut s = LaneSmoother::new(0.4, 2).unwrap();
        let m = model(100.0, 300.0);
        assert_eq!(s.update(Some(m.clone())), Some(m.clone()));
        assert_eq!(s.update(None), Some(m.clone()));
        assert_eq!(s.update(None), Some(m.clone()));
        assert_eq!(s.update(None), None);
        assert_eq!(s.update(None), None);
        let fresh = model(110.0, 310.0);
        assert_eq!(s.update(Some(fresh.clone())), Some(fresh));
        assert!(LaneSmoother::new(0.0, 1).is_err());
        assert!(LaneSmoother::new(1.5, 1).is_err());
    }

    #[test]
    fn off_center_examples() {
        let m = model(866.0, 966.0);
        let on = off_center_distance(&m, [916.0, 500.0]).unwrap();
        assert_eq!(on.distance, 0.0);

        let off = off_center_distance(&m, [910.0, 573.0]).unwrap();
        assert_eq!(off.magnitude(), 6.0);
        assert!(off.distance < 0.0);
        assert_eq!(off.closest, [916.0, 573.0]);

        let right = off_center_distance(&m, [930.0, 10.0]).unwrap();
        assert_eq!(right.distance, 14.0);
    }

    #[test]
    fn off_center_slanted_matches_brute_force() {
        let l = LanePolynomial::new([0.0, 0.5, -50.0], [0.0, 200.0]).unwrap();
        let r = LanePolynomial::new([0.0, 0.5, 50.0], [0.0, 200.0]).unwrap();
        let m = build_lane_model(l, r, 0).unwrap();
        let centroid = [60.0, 100.0];
        let got = off_center_distance(&m, centroid).unwrap();

        let mut best = f64::INFINITY;
        let mut best_pt = [0.0, 0.0];
        for y in 0..=200 {
            let p = [0.5 * y as f64, y as f64];
            let d = ((p[0] - centroid[0]).powi(2) + (p[1] - centroid[1]).powi(2)).sqrt();
            if d < best {
                best = d;
                best_pt = p;
            }
        }
        assert!((got.magnitude() - best).abs() < 1e-12);
        assert_eq!(got.closest, best_pt);
        assert!(got.distance > 0.0);

        let on_line = off_center_distance(&m, got.closest).unwrap();
        assert_eq!(on_line.distance, 0.0);
    }

    #[test]
    fn off_center_horizontal_mode() {
        let l = LanePolynomial::new([0.0, 0.5, -50.0], [0.0, 200.0]).unwrap();
        let r = LanePolynomial::new([0.0, 0.5, 50.0], [0.0, 200.0]).unwrap();
        let m = build_lane_model(l, r, 0).unwrap();
        let got = off_center_with_mode(&m, [60.0, 100.0], OffCenterMode::Horizontal).unwrap();
        assert_eq!(got.distance, 10.0);
        assert_eq!(got.closest, [50.0, 100.0]);
    }

    #[test]
    fn off_center_empty_domain() {
        let mut m = model(0.0, 10.0);
        m.center.domain = [3.2, 3.7];
        assert!(matches!(off_center_distance(&m, [1.0, 1.0]), Err(Error::Geometry(_))));
    }
}
