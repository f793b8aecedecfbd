//! `.glyphs.jsonl`: one JSON object per line,
//!
//! ```text
//! {"child_id": str, "group": "TD"|"D", "glyph": "a".."z"|"0".."9",
//!  "sampling_hz": number, "resolution_mm": number,
//!  "samples": [[t_ms, x_mm, y_mm, pen_down(0|1), pressure|null], ...]}
//! ```
//!
//! UTF-8 with LF line endings. Floats are written in shortest round-trip
//! form and parsed with correct rounding, so parse(serialize(r)) == r
//! bit-for-bit.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{validate_samples, GlyphClass, GlyphError, GlyphRecording, Group, RecordingMeta, SampleIssue, SamplePoint};

type RawSample = (f64, f64, f64, u8, Option<f64>);

#[derive(Serialize)]
struct LineOut<'a> {
    child_id: &'a str,
    group: Group,
    glyph: GlyphClass,
    sampling_hz: f64,
    resolution_mm: f64,
    samples: Vec<RawSample>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LineIn {
    child_id: String,
    group: Group,
    glyph: GlyphClass,
    sampling_hz: f64,
    resolution_mm: f64,
    samples: Vec<RawSample>,
}

pub fn recording_to_line(rec: &GlyphRecording) -> String {
    let line = LineOut {
        child_id: &rec.child_id,
        group: rec.group,
        glyph: rec.requested,
        sampling_hz: rec.meta.sampling_hz,
        resolution_mm: rec.meta.resolution_mm,
        samples: rec
            .samples
            .iter()
            .map(|s| (s.t_ms, s.x_mm, s.y_mm, s.pen_down as u8, s.pressure))
            .collect(),
    };
    serde_json::to_string(&line).expect("recording serializes")
}

pub fn write_recordings<W: Write>(mut out: W, recs: &[GlyphRecording]) -> std::io::Result<()> {
    for rec in recs {
        out.write_all(recording_to_line(rec).as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

fn parse_line(text: &str, line: usize) -> Result<GlyphRecording, GlyphError> {
    let raw: LineIn = serde_json::from_str(text).map_err(|e| GlyphError::Parse { line, message: e.to_string() })?;
    let mut samples = Vec::with_capacity(raw.samples.len());
    for (i, (t, x, y, pen, pressure)) in raw.samples.into_iter().enumerate() {
        let pen_down = match pen {
            0 => false,
            1 => true,
            other => {
                return Err(GlyphError::Parse { line, message: format!("sample {i}: pen_down must be 0 or 1, got {other}") })
            }
        };
        samples.push(SamplePoint { t_ms: t, x_mm: x, y_mm: y, pen_down, pressure });
    }
    if raw.glyph.is_star() {
        return Err(GlyphError::Validation { line, issue: SampleIssue::StarRequested });
    }
    validate_samples(&samples).map_err(|issue| GlyphError::Validation { line, issue })?;
    Ok(GlyphRecording {
        child_id: raw.child_id,
        group: raw.group,
        requested: raw.glyph,
        samples,
        meta: RecordingMeta { sampling_hz: raw.sampling_hz, resolution_mm: raw.resolution_mm },
    })
}

/// Parses a whole `.glyphs.jsonl` byte stream. Blank lines are skipped;
/// line numbers in errors are 1-based.
pub fn parse_recording_file(bytes: &[u8]) -> Result<Vec<GlyphRecording>, GlyphError> {
    let text = std::str::from_utf8(bytes).map_err(|e| GlyphError::Parse { line: 0, message: e.to_string() })?;
    text.split('\n')
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_line(l, i + 1))
        .collect()
}

pub fn read_recordings<R: BufRead>(mut input: R) -> Result<Vec<GlyphRecording>, GlyphError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    parse_recording_file(&bytes)
}
