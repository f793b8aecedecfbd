//! Glyph recordings: the data model, the `.glyphs.jsonl` file format, and the
//! preprocessing that turns pen trajectories into recognizer inputs.

mod format;
mod preprocess;
mod raster;
mod split;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use format::{parse_recording_file, read_recordings, recording_to_line, write_recordings};
pub use preprocess::{
    normalize, normalize_samples, resample_runs, to_sequence_features, FeatureSequence,
    NormalizedTrajectory, TrajectoryPoint, DEFAULT_L_MAX, DEFAULT_STEP_MS,
};
pub use raster::{rasterize, GlyphImage, DEFAULT_IMAGE_SIZE, RASTER_MARGIN};
pub use split::{split_dataset, DatasetSplit, DEFAULT_FOLD_COUNT};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GlyphError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{issue} at line {line}")]
    Validation { line: usize, issue: SampleIssue },
    #[error("degenerate trajectory: {0}")]
    Degenerate(&'static str),
    #[error("cannot split {td} typically-developing children into {folds} folds")]
    TooFewChildren { td: usize, folds: usize },
    #[error("fold index {index} out of range for {folds} folds")]
    FoldOutOfRange { index: usize, folds: usize },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for GlyphError {
    fn from(e: std::io::Error) -> Self {
        GlyphError::Io(e.to_string())
    }
}

/// One of the 37 recognizer classes: 'a'..'z' (0-25), '0'..'9' (26-35), '*' (36).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GlyphClass(u8);

impl GlyphClass {
    pub const COUNT: usize = 37;
    /// Number of glyphs a child is asked to write.
    pub const REAL_COUNT: usize = 36;
    pub const STAR: GlyphClass = GlyphClass(36);

    pub fn from_index(index: usize) -> Option<Self> {
        (index < Self::COUNT).then_some(GlyphClass(index as u8))
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'a'..='z' => Some(GlyphClass(c as u8 - b'a')),
            '0'..='9' => Some(GlyphClass(26 + c as u8 - b'0')),
            '*' => Some(Self::STAR),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn as_char(self) -> char {
        match self.0 {
            0..=25 => (b'a' + self.0) as char,
            26..=35 => (b'0' + self.0 - 26) as char,
            _ => '*',
        }
    }

    pub fn is_star(self) -> bool {
        self == Self::STAR
    }

    /// All 37 classes in index order.
    pub fn all() -> impl Iterator<Item = GlyphClass> {
        (0..Self::COUNT as u8).map(GlyphClass)
    }

    /// The 36 writable glyphs in index order.
    pub fn real() -> impl Iterator<Item = GlyphClass> {
        (0..Self::REAL_COUNT as u8).map(GlyphClass)
    }
}

impl fmt::Debug for GlyphClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "'{}'", self.as_char())
    }
}

impl fmt::Display for GlyphClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl Serialize for GlyphClass {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut buf = [0u8; 4];
        s.serialize_str(self.as_char().encode_utf8(&mut buf))
    }
}

impl<'de> Deserialize<'de> for GlyphClass {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => GlyphClass::from_char(c)
                .ok_or_else(|| serde::de::Error::custom(format!("unknown glyph {s:?}"))),
            _ => Err(serde::de::Error::custom(format!("unknown glyph {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    #[serde(rename = "TD")]
    TypicallyDeveloping,
    #[serde(rename = "D")]
    Dysgraphic,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::TypicallyDeveloping => "TD",
            Group::Dysgraphic => "D",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplePoint {
    pub t_ms: f64,
    pub x_mm: f64,
    pub y_mm: f64,
    pub pen_down: bool,
    /// Carried through parsing, never fed to a model.
    pub pressure: Option<f64>,
}

impl SamplePoint {
    pub fn new(t_ms: f64, x_mm: f64, y_mm: f64, pen_down: bool) -> Self {
        SamplePoint { t_ms, x_mm, y_mm, pen_down, pressure: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordingMeta {
    pub sampling_hz: f64,
    pub resolution_mm: f64,
}

impl Default for RecordingMeta {
    fn default() -> Self {
        RecordingMeta { sampling_hz: 200.0, resolution_mm: 0.25 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlyphRecording {
    pub child_id: String,
    pub group: Group,
    pub requested: GlyphClass,
    pub samples: Vec<SamplePoint>,
    pub meta: RecordingMeta,
}

impl GlyphRecording {
    pub fn pen_down_count(&self) -> usize {
        self.samples.iter().filter(|s| s.pen_down).count()
    }
}

/// Why a sample list is not an acceptable recording. `code()` is the
/// machine-readable reason reported by the HTTP service.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SampleIssue {
    #[error("empty sample list")]
    Empty,
    #[error("non-finite value in sample {0}")]
    NonFinite(usize),
    #[error("negative t in sample {0}")]
    NegativeTime(usize),
    #[error("non-monotone t")]
    NonMonotoneTime(usize),
    #[error("repeated t within a stroke")]
    RepeatedTimeInStroke(usize),
    #[error("pressure outside [0, 1] in sample {0}")]
    PressureOutOfRange(usize),
    #[error("no pen-down sample")]
    NoPenDown,
    #[error("the star class is never requested from a child")]
    StarRequested,
}

impl SampleIssue {
    pub fn code(&self) -> &'static str {
        match self {
            SampleIssue::Empty => "empty_samples",
            SampleIssue::NonFinite(_) => "non_finite_value",
            SampleIssue::NegativeTime(_) => "negative_time",
            SampleIssue::NonMonotoneTime(_) => "non_monotone_time",
            SampleIssue::RepeatedTimeInStroke(_) => "repeated_time_in_stroke",
            SampleIssue::PressureOutOfRange(_) => "pressure_out_of_range",
            SampleIssue::NoPenDown => "no_pen_down",
            SampleIssue::StarRequested => "star_requested",
        }
    }
}

/// Checks the sample-level invariants of a real recording.
pub fn validate_samples(samples: &[SamplePoint]) -> Result<(), SampleIssue> {
    if samples.is_empty() {
        return Err(SampleIssue::Empty);
    }
    for (i, s) in samples.iter().enumerate() {
        if !(s.t_ms.is_finite() && s.x_mm.is_finite() && s.y_mm.is_finite()) {
            return Err(SampleIssue::NonFinite(i));
        }
        if s.t_ms < 0.0 {
            return Err(SampleIssue::NegativeTime(i));
        }
        if let Some(p) = s.pressure {
            if !(0.0..=1.0).contains(&p) {
                return Err(SampleIssue::PressureOutOfRange(i));
            }
        }
        if i > 0 {
            let prev = &samples[i - 1];
            if s.t_ms < prev.t_ms {
                return Err(SampleIssue::NonMonotoneTime(i));
            }
            if s.t_ms == prev.t_ms && s.pen_down && prev.pen_down {
                return Err(SampleIssue::RepeatedTimeInStroke(i));
            }
        }
    }
    if !samples.iter().any(|s| s.pen_down) {
        return Err(SampleIssue::NoPenDown);
    }
    Ok(())
}
