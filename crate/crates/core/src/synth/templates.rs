use std::collections::BTreeMap;

use serde::Deserialize;

use super::SynthError;
use crate::glyph::GlyphClass;

const BUILTIN: &str = include_str!("../../data/templates.json");

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlPoint {
    pub x: f64,
    pub y: f64,
    /// Whether the pen is down while moving to this point. `false` marks the
    /// first point of every stroke after the first.
    pub pen_down: bool,
}

/// Canonical cursive polyline for one glyph, in millimetres (y up, baseline 0).
#[derive(Clone, Debug, PartialEq)]
pub struct GlyphTemplate {
    pub glyph: GlyphClass,
    pub control_points: Vec<ControlPoint>,
    pub nominal_duration_ms: f64,
}

impl GlyphTemplate {
    pub fn from_strokes(glyph: GlyphClass, strokes: &[Vec<(f64, f64)>], nominal_duration_ms: f64) -> Result<Self, SynthError> {
        let mut control_points = Vec::new();
        for (s, stroke) in strokes.iter().enumerate() {
            for (i, &(x, y)) in stroke.iter().enumerate() {
                control_points.push(ControlPoint { x, y, pen_down: s == 0 || i > 0 });
            }
        }
        let t = GlyphTemplate { glyph, control_points, nominal_duration_ms };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<(), SynthError> {
        let has_segment = self.strokes().iter().any(|s| s.len() >= 2);
        if self.glyph.is_star() || self.control_points.len() < 4 || !has_segment || self.nominal_duration_ms <= 0.0 {
            return Err(SynthError::InvalidTemplate(self.glyph));
        }
        Ok(())
    }

    pub fn strokes(&self) -> Vec<Vec<(f64, f64)>> {
        let mut out: Vec<Vec<(f64, f64)>> = Vec::new();
        for (i, p) in self.control_points.iter().enumerate() {
            if i == 0 || !p.pen_down {
                out.push(Vec::new());
            }
            out.last_mut().expect("stroke started").push((p.x, p.y));
        }
        out
    }

    /// Same trace drawn backwards: stroke order and point order both reversed.
    pub fn reversed(&self, glyph: GlyphClass) -> Self {
        let strokes: Vec<Vec<(f64, f64)>> =
            self.strokes().into_iter().rev().map(|s| s.into_iter().rev().collect()).collect();
        Self::from_strokes(glyph, &strokes, self.nominal_duration_ms).expect("reversal preserves validity")
    }

    /// Pen-down path length plus straight pen-up travel between strokes.
    pub fn path_length(&self) -> f64 {
        self.control_points.windows(2).map(|w| ((w[1].x - w[0].x).powi(2) + (w[1].y - w[0].y).powi(2)).sqrt()).sum()
    }
}

#[derive(Deserialize)]
struct BankFile {
    format: String,
    version: u32,
    glyphs: Vec<BankEntry>,
}

#[derive(Deserialize)]
struct BankEntry {
    glyph: GlyphClass,
    #[serde(default)]
    nominal_duration_ms: Option<f64>,
    #[serde(default)]
    strokes: Option<Vec<Vec<(f64, f64)>>>,
    #[serde(default)]
    reverse_of: Option<GlyphClass>,
}

#[derive(Clone, Debug)]
pub struct TemplateBank {
    templates: BTreeMap<GlyphClass, GlyphTemplate>,
    reversal_pairs: Vec<(GlyphClass, GlyphClass)>,
}

impl TemplateBank {
    /// The shipped bank covering all 36 glyphs. 'l', '0' and '9' are defined
    /// as the reversed traces of 'e', 'o' and 'g': identical images,
    /// opposite dynamics.
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN).expect("builtin template bank is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        let file: BankFile = serde_json::from_str(text).map_err(|e| SynthError::BankFormat(e.to_string()))?;
        if file.format != "glyph-templates" || file.version != 1 {
            return Err(SynthError::BankFormat(format!("unsupported bank {} v{}", file.format, file.version)));
        }
        let mut templates = BTreeMap::new();
        let mut pending = Vec::new();
        for e in file.glyphs {
            match (e.strokes, e.reverse_of) {
                (Some(strokes), None) => {
                    let dur = e.nominal_duration_ms.ok_or(SynthError::InvalidTemplate(e.glyph))?;
                    templates.insert(e.glyph, GlyphTemplate::from_strokes(e.glyph, &strokes, dur)?);
                }
                (None, Some(src)) => pending.push((src, e.glyph)),
                _ => return Err(SynthError::InvalidTemplate(e.glyph)),
            }
        }
        let mut reversal_pairs = Vec::new();
        for (src, glyph) in pending {
            let base = templates.get(&src).ok_or(SynthError::MissingTemplate(src))?.reversed(glyph);
            templates.insert(glyph, base);
            reversal_pairs.push((src, glyph));
        }
        Ok(TemplateBank { templates, reversal_pairs })
    }

    pub fn get(&self, glyph: GlyphClass) -> Result<&GlyphTemplate, SynthError> {
        self.templates.get(&glyph).ok_or(SynthError::MissingTemplate(glyph))
    }

    pub fn insert(&mut self, template: GlyphTemplate) {
        self.templates.insert(template.glyph, template);
    }

    pub fn remove(&mut self, glyph: GlyphClass) -> Option<GlyphTemplate> {
        self.templates.remove(&glyph)
    }

    /// Look-alike pairs built by trace reversal, (original, reversed).
    pub fn reversal_pairs(&self) -> &[(GlyphClass, GlyphClass)] {
        &self.reversal_pairs
    }

    pub fn covers_all_glyphs(&self) -> Result<(), SynthError> {
        GlyphClass::real().try_for_each(|g| self.get(g).map(|_| ()))
    }
}
