use serde::{Deserialize, Serialize};

use super::{GlyphError, GlyphRecording, SamplePoint};

pub const DEFAULT_STEP_MS: f64 = 20.0;
pub const DEFAULT_L_MAX: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub x: f64,
    pub y: f64,
    pub pen_down: bool,
}

/// Uniformly resampled trajectory with the pen-down centroid at the origin
/// and every coordinate in [-1, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedTrajectory {
    pub points: Vec<TrajectoryPoint>,
    pub step_ms: f64,
}

impl NormalizedTrajectory {
    /// Re-expresses the trajectory as a recording sampled every `step_ms`.
    pub fn to_samples(&self) -> Vec<SamplePoint> {
        self.points
            .iter()
            .enumerate()
            .map(|(i, p)| SamplePoint::new(i as f64 * self.step_ms, p.x, p.y, p.pen_down))
            .collect()
    }
}

/// (dx, dy, pen) rows; row 0 is (0, 0, pen_0).
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSequence {
    pub rows: Vec<[f64; 3]>,
}

impl FeatureSequence {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Row-major `len x 3` buffer.
    pub fn flat(&self) -> Vec<f64> {
        self.rows.iter().flatten().copied().collect()
    }
}

/// Resamples each maximal run of equal pen state on its own grid
/// `t_start + k * step_ms`. Interpolation never bridges two runs.
pub fn resample_runs(samples: &[SamplePoint], step_ms: f64) -> Vec<TrajectoryPoint> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < samples.len() {
        let pen = samples[start].pen_down;
        let mut end = start;
        while end + 1 < samples.len() && samples[end + 1].pen_down == pen {
            end += 1;
        }
        resample_run(&samples[start..=end], step_ms, &mut out);
        start = end + 1;
    }
    out
}

fn resample_run(run: &[SamplePoint], step_ms: f64, out: &mut Vec<TrajectoryPoint>) {
    let t0 = run[0].t_ms;
    let duration = run[run.len() - 1].t_ms - t0;
    let steps = (duration / step_ms + 1e-9).floor() as usize;
    let mut j = 0;
    for k in 0..=steps {
        let t = t0 + k as f64 * step_ms;
        while j < run.len() && run[j].t_ms < t {
            j += 1;
        }
        let (x, y) = if j == 0 {
            (run[0].x_mm, run[0].y_mm)
        } else if j == run.len() {
            let last = &run[run.len() - 1];
            (last.x_mm, last.y_mm)
        } else if run[j].t_ms == t {
            (run[j].x_mm, run[j].y_mm)
        } else {
            let (a, b) = (&run[j - 1], &run[j]);
            let u = (t - a.t_ms) / (b.t_ms - a.t_ms);
            (a.x_mm + (b.x_mm - a.x_mm) * u, a.y_mm + (b.y_mm - a.y_mm) * u)
        };
        out.push(TrajectoryPoint { x, y, pen_down: run[0].pen_down });
    }
}

pub fn normalize(rec: &GlyphRecording) -> Result<NormalizedTrajectory, GlyphError> {
    normalize_samples(&rec.samples, DEFAULT_STEP_MS)
}

pub fn normalize_samples(samples: &[SamplePoint], step_ms: f64) -> Result<NormalizedTrajectory, GlyphError> {
    if samples.iter().filter(|s| s.pen_down).count() < 2 {
        return Err(GlyphError::Degenerate("fewer than two pen-down samples"));
    }
    let mut points = resample_runs(samples, step_ms);
    let (mut cx, mut cy, mut n) = (0.0, 0.0, 0usize);
    for p in points.iter().filter(|p| p.pen_down) {
        cx += p.x;
        cy += p.y;
        n += 1;
    }
    cx /= n as f64;
    cy /= n as f64;
    let spread = points
        .iter()
        .filter(|p| p.pen_down)
        .map(|p| (p.x - cx).abs().max((p.y - cy).abs()))
        .fold(0.0, f64::max);
    if spread < 1e-9 {
        return Err(GlyphError::Degenerate("all pen-down samples at one point"));
    }
    let scale = points.iter().map(|p| (p.x - cx).abs().max((p.y - cy).abs())).fold(0.0, f64::max);
    for p in &mut points {
        p.x = (p.x - cx) / scale;
        p.y = (p.y - cy) / scale;
    }
    Ok(NormalizedTrajectory { points, step_ms })
}

/// Delta encoding. Trajectories longer than `l_max` are uniformly subsampled
/// (first and last point always kept) before differencing.
pub fn to_sequence_features(traj: &NormalizedTrajectory, l_max: usize) -> FeatureSequence {
    let n = traj.points.len();
    let picked: Vec<&TrajectoryPoint> = if n <= l_max || l_max < 2 {
        traj.points.iter().take(l_max.max(1)).collect()
    } else {
        let span = l_max - 1;
        (0..l_max).map(|i| &traj.points[(i * (n - 1) + span / 2) / span]).collect()
    };
    let mut rows = Vec::with_capacity(picked.len());
    let mut prev: Option<&TrajectoryPoint> = None;
    for p in picked {
        let pen = if p.pen_down { 1.0 } else { 0.0 };
        rows.push(match prev {
            None => [0.0, 0.0, pen],
            Some(q) => [p.x - q.x, p.y - q.y, pen],
        });
        prev = Some(p);
    }
    FeatureSequence { rows }
}
