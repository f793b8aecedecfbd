use super::{NormalizedTrajectory, TrajectoryPoint};

pub const DEFAULT_IMAGE_SIZE: usize = 28;
pub const RASTER_MARGIN: f64 = 2.0;

/// Row-major S x S grayscale image, values in [0, 1], max value 1.
#[derive(Clone, Debug, PartialEq)]
pub struct GlyphImage {
    pub size: usize,
    pub pixels: Vec<f64>,
}

impl GlyphImage {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.size + col]
    }
}

/// Maps normalized coordinates to continuous pixel coordinates (col, row);
/// pixel (r, c) covers [c, c+1) x [r, r+1). Positive y points up.
pub(crate) fn to_pixel(p: &TrajectoryPoint, size: usize) -> (f64, f64) {
    let span = size as f64 - 2.0 * RASTER_MARGIN;
    (RASTER_MARGIN + (p.x + 1.0) * 0.5 * span, RASTER_MARGIN + (1.0 - p.y) * 0.5 * span)
}

fn segment_distance(px: f64, py: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let u = if len2 == 0.0 { 0.0 } else { (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0) };
    let (qx, qy) = (a.0 + u * dx, a.1 + u * dy);
    ((px - qx).powi(2) + (py - qy).powi(2)).sqrt()
}

/// Draws every pen-down segment as a 1-pixel-wide anti-aliased line
/// (intensity `1 - distance`, clamped at 0, combined by max) and scales the
/// brightest pixel to 1. Isolated pen-down points are drawn as dots.
pub fn rasterize(traj: &NormalizedTrajectory, size: usize) -> GlyphImage {
    assert!(size >= 8, "image size must be at least 8");
    let mut pixels = vec![0.0f64; size * size];
    let pts = &traj.points;
    let mut draw = |a: (f64, f64), b: (f64, f64)| {
        let r0 = (a.1.min(b.1) - 1.5).floor().max(0.0) as usize;
        let r1 = ((a.1.max(b.1) + 1.5).ceil().max(0.0) as usize).min(size);
        let c0 = (a.0.min(b.0) - 1.5).floor().max(0.0) as usize;
        let c1 = ((a.0.max(b.0) + 1.5).ceil().max(0.0) as usize).min(size);
        for r in r0..r1 {
            for c in c0..c1 {
                let d = segment_distance(c as f64 + 0.5, r as f64 + 0.5, a, b);
                let v = 1.0 - d;
                let px = &mut pixels[r * size + c];
                if v > *px {
                    *px = v;
                }
            }
        }
    };
    for i in 0..pts.len() {
        if !pts[i].pen_down {
            continue;
        }
        let here = to_pixel(&pts[i], size);
        let joined_next = i + 1 < pts.len() && pts[i + 1].pen_down;
        let joined_prev = i > 0 && pts[i - 1].pen_down;
        if joined_next {
            draw(here, to_pixel(&pts[i + 1], size));
        } else if !joined_prev {
            draw(here, here);
        }
    }
    let max = pixels.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        for p in &mut pixels {
            *p /= max;
        }
    }
    GlyphImage { size, pixels }
}
