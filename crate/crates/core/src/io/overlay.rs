use crate::behavior::Severity;
use crate::error::Result;
use crate::raster::Raster;

use super::annotations::AnnotationRecord;

type Rgb = [u8; 3];

const LEFT: Rgb = [255, 0, 0];
const RIGHT: Rgb = [0, 0, 255];
const CENTER: Rgb = [0, 255, 0];
const CENTROID: Rgb = [255, 255, 0];
const CLOSEST: Rgb = [255, 0, 255];

fn severity_rgb(s: Severity) -> Rgb {
    match s {
        Severity::Normal => [0, 0, 255],
        Severity::Caution => [255, 255, 0],
        Severity::Alert => [255, 0, 0],
    }
}

struct Canvas(Raster);

impl Canvas {
    fn plot(&mut self, x: f64, y: f64, color: Rgb) {
        let (x, y) = (x.round(), y.round());
        if x < 0.0 || y < 0.0 || x >= self.0.width() as f64 || y >= self.0.height() as f64 {
            return;
        }
        for (c, v) in color.into_iter().enumerate() {
            self.0.set(x as usize, y as usize, c, v);
        }
    }

    fn line(&mut self, a: [f64; 2], b: [f64; 2], color: Rgb) {
        let steps = (b[0] - a[0]).abs().max((b[1] - a[1]).abs()).ceil().max(1.0) as usize;
        for i in 0..=steps {
            let t = i as f64 / steps as f64;
            self.plot(a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), color);
        }
    }

    fn curve(&mut self, coeffs: [f64; 3], domain: [f64; 2], color: Rgb) {
        let [a, b, c] = coeffs;
        let x = |y: f64| (a * y + b) * y + c;
        let mut y = domain[0];
        while y < domain[1] {
            let next = (y + 1.0).min(domain[1]);
            self.line([x(y), y], [x(next), next], color);
            y = next;
        }
    }

    fn marker(&mut self, p: [f64; 2], color: Rgb) {
        for d in -2..=2 {
            let d = f64::from(d);
            self.plot(p[0] + d, p[1], color);
            self.plot(p[0], p[1] + d, color);
        }
    }
}

/// Draws an annotation record over a frame, returning an RGB raster.
///
/// Lane boundaries are red (left) and blue (right), the centerline green,
/// boxes take their severity color, and each centroid is joined to its
/// closest centerline point.
pub fn render_overlay(base: &Raster, record: &AnnotationRecord) -> Result<Raster> {
    let rgb = if base.channels() == 3 {
        base.clone()
    } else {
        let data = base.data().iter().flat_map(|&v| [v, v, v]).collect();
        Raster::from_vec(base.width(), base.height(), 3, data)?
    };
    let mut canvas = Canvas(rgb);
    if let Some(lane) = &record.lane {
        canvas.curve(lane.left, lane.domain, LEFT);
        canvas.curve(lane.right, lane.domain, RIGHT);
        canvas.curve(lane.center, lane.domain, CENTER);
    }
    for obj in &record.objects {
        let [x, y, w, h] = obj.bbox;
        let color = severity_rgb(obj.severity);
        let corners = [[x, y], [x + w, y], [x + w, y + h], [x, y + h]];
        for i in 0..4 {
            canvas.line(corners[i], corners[(i + 1) % 4], color);
        }
        if let Some(p) = obj.closest_center_point {
            canvas.line(obj.centroid, p, CLOSEST);
            canvas.marker(p, CLOSEST);
        }
        canvas.marker(obj.centroid, CENTROID);
    }
    Ok(canvas.0)
}
