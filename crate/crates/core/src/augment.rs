//! The star class: hybrids stitched together from pieces of real glyphs, so
//! the recognizers have somewhere to put shapes that are not any glyph.

use thiserror::Error;

use crate::glyph::{normalize, GlyphClass, GlyphRecording, Group, SamplePoint};
use crate::rng;

pub const MIN_SOURCE_SAMPLES: usize = 6;

/// Attempts per hybrid before giving up on a source draw that keeps
/// producing degenerate (ink-free or single-point) shapes.
const MAX_DRAWS: u64 = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AugmentError {
    #[error("a hybrid needs 2 or 3 sources, got {0}")]
    SourceCount(usize),
    #[error("source {index} has {samples} samples, need at least {MIN_SOURCE_SAMPLES}")]
    ShortSource { index: usize, samples: usize },
    #[error("star fraction {0} outside [0, 1]")]
    Fraction(f64),
}

/// Sample range `[start, start + len)` of segment `part` when a recording of
/// `len_total` samples is cut into `parts` pieces of ⌈len_total/parts⌉.
pub fn segment_range(len_total: usize, parts: usize, part: usize) -> std::ops::Range<usize> {
    let len = len_total.div_ceil(parts);
    let start = (part * len).min(len_total - len);
    start..start + len
}

/// Concatenates segment `i` of source `i`. Each piece is translated to start
/// where the previous one ended, and the clock restarts at zero with the
/// first source's sampling period.
pub fn make_star_hybrid(sources: &[&GlyphRecording]) -> Result<GlyphRecording, AugmentError> {
    let n = sources.len();
    if !(2..=3).contains(&n) {
        return Err(AugmentError::SourceCount(n));
    }
    if let Some((index, s)) = sources.iter().enumerate().find(|(_, s)| s.samples.len() < MIN_SOURCE_SAMPLES) {
        return Err(AugmentError::ShortSource { index, samples: s.samples.len() });
    }
    let meta = sources[0].meta;
    let dt = 1000.0 / meta.sampling_hz;
    let mut samples: Vec<SamplePoint> = Vec::new();
    for (i, src) in sources.iter().enumerate() {
        let piece = &src.samples[segment_range(src.samples.len(), n, i)];
        let (ox, oy) = match samples.last() {
            Some(last) => (last.x_mm - piece[0].x_mm, last.y_mm - piece[0].y_mm),
            None => (0.0, 0.0),
        };
        for s in piece {
            let t = samples.len() as f64 * dt;
            samples.push(SamplePoint { t_ms: t, x_mm: s.x_mm + ox, y_mm: s.y_mm + oy, pen_down: s.pen_down, pressure: s.pressure });
        }
    }
    let ids: Vec<&str> = sources.iter().map(|s| s.child_id.as_str()).collect();
    Ok(GlyphRecording {
        child_id: format!("*:{}", ids.join("+")),
        group: Group::TypicallyDeveloping,
        requested: GlyphClass::STAR,
        samples,
        meta,
    })
}

/// Number of hybrids `augment_training_set` appends.
pub fn star_count(train_len: usize, star_fraction: f64) -> usize {
    (star_fraction * train_len as f64 / GlyphClass::REAL_COUNT as f64).floor() as usize
}

/// Appends ⌊fraction·|train|/36⌋ star hybrids built from `train` only. With
/// fraction 1 the star class gets as many examples as an average glyph.
pub fn augment_training_set(train: &[GlyphRecording], star_fraction: f64, seed: u64) -> Result<Vec<GlyphRecording>, AugmentError> {
    if !(0.0..=1.0).contains(&star_fraction) {
        return Err(AugmentError::Fraction(star_fraction));
    }
    let mut out = train.to_vec();
    let eligible: Vec<&GlyphRecording> =
        train.iter().filter(|r| !r.requested.is_star() && r.samples.len() >= MIN_SOURCE_SAMPLES).collect();
    if eligible.is_empty() {
        return Ok(out);
    }
    for k in 0..star_count(train.len(), star_fraction) {
        for draw in 0..MAX_DRAWS {
            let mut r = rng::stream(rng::derive(rng::derive(seed, k as u64), draw));
            let n = 2 + rng::index(&mut r, 2);
            let sources: Vec<&GlyphRecording> = (0..n).map(|_| eligible[rng::index(&mut r, eligible.len())]).collect();
            let hybrid = make_star_hybrid(&sources)?;
            if normalize(&hybrid).is_ok() {
                out.push(hybrid);
                break;
            }
        }
    }
    Ok(out)
}
