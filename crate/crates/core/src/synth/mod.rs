//! Reproducible synthetic cursive corpora.
//!
//! A writer is a [`WriterProfile`]: global geometry (size, slant, page
//! position, speed) plus the impairment knobs that degrade a trace:
//! sinusoidal tremor with white positional noise, dropped pen-down segments,
//! and strokes drawn in reverse. Reversal keeps the final ink identical while
//! changing the dynamics, which is exactly what a static image cannot see.
//!
//! All randomness flows from `ChaCha8Rng` streams derived with SplitMix64
//! (see [`crate::rng`]), so a corpus is bit-identical for a given master seed.

mod templates;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::glyph::{GlyphClass, GlyphRecording, Group, RecordingMeta, SamplePoint};
use crate::rng::{self, StreamRng};

pub use templates::{ControlPoint, GlyphTemplate, TemplateBank};

/// Every segment and pen-up move lasts a whole number of these, so resampled
/// trajectories hit template corners whichever way a stroke is drawn.
pub const TIME_QUANTUM_MS: f64 = 20.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("no template for glyph '{0}'")]
    MissingTemplate(GlyphClass),
    #[error("invalid template for glyph '{0}'")]
    InvalidTemplate(GlyphClass),
    #[error("template bank: {0}")]
    BankFormat(String),
    #[error("the star class cannot be synthesized")]
    StarRequested,
    #[error("profile {0} violates its group invariants")]
    InvalidProfile(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WriterProfile {
    pub writer_id: String,
    pub group: Group,
    pub tremor_amp_mm: f64,
    pub wobble_hz: f64,
    pub segment_drop_prob: f64,
    pub direction_reversal_prob: f64,
    pub speed_jitter: f64,
    /// Writing speed relative to the template's nominal duration.
    pub speed_factor: f64,
    pub size_scale: f64,
    /// Horizontal shear applied as x += slant * y.
    pub slant: f64,
    pub origin_mm: (f64, f64),
    pub seed: u64,
}

impl WriterProfile {
    /// Noise-free writer that reproduces templates exactly.
    pub fn ideal(writer_id: &str, seed: u64) -> Self {
        WriterProfile {
            writer_id: writer_id.to_string(),
            group: Group::TypicallyDeveloping,
            tremor_amp_mm: 0.0,
            wobble_hz: 6.0,
            segment_drop_prob: 0.0,
            direction_reversal_prob: 0.0,
            speed_jitter: 0.0,
            speed_factor: 1.0,
            size_scale: 1.0,
            slant: 0.0,
            origin_mm: (0.0, 0.0),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let unit = |p: f64| (0.0..=1.0).contains(&p);
        let ok = unit(self.segment_drop_prob)
            && unit(self.direction_reversal_prob)
            && unit(self.speed_jitter)
            && self.tremor_amp_mm >= 0.0
            && self.speed_factor > 0.0
            && self.size_scale > 0.0
            && match self.group {
                Group::TypicallyDeveloping => {
                    self.tremor_amp_mm <= 0.3 && self.segment_drop_prob == 0.0 && self.direction_reversal_prob == 0.0
                }
                Group::Dysgraphic => {
                    self.tremor_amp_mm >= 0.8 || self.segment_drop_prob >= 0.15 || self.direction_reversal_prob >= 0.15
                }
            };
        if ok {
            Ok(())
        } else {
            Err(SynthError::InvalidProfile(self.writer_id.clone()))
        }
    }
}

/// Closed interval `[lo, hi]` sampled uniformly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range(pub f64, pub f64);

impl Range {
    fn sample(&self, rng: &mut StreamRng) -> f64 {
        self.0 + (self.1 - self.0) * rng.random::<f64>()
    }
}

/// Sampling ranges for one writer group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupRanges {
    pub tremor_amp_mm: Range,
    pub wobble_hz: Range,
    pub segment_drop_prob: Range,
    pub direction_reversal_prob: Range,
    pub speed_jitter: Range,
    pub speed_factor: Range,
    pub size_scale: Range,
    pub slant: Range,
}

impl GroupRanges {
    pub fn typically_developing() -> Self {
        GroupRanges {
            tremor_amp_mm: Range(0.05, 0.3),
            wobble_hz: Range(5.0, 9.0),
            segment_drop_prob: Range(0.0, 0.0),
            direction_reversal_prob: Range(0.0, 0.0),
            speed_jitter: Range(0.05, 0.15),
            speed_factor: Range(0.85, 1.2),
            size_scale: Range(0.85, 1.15),
            slant: Range(-0.2, 0.2),
        }
    }

    /// Default impairment. The knobs are a stand-in for illegibility, not a
    /// clinical model: mostly dynamic (reversed strokes, slow uneven speed,
    /// extra jitter), with tremor in the typical range and no ink gaps.
    pub fn dysgraphic() -> Self {
        GroupRanges {
            tremor_amp_mm: Range(0.1, 0.3),
            wobble_hz: Range(4.0, 8.0),
            segment_drop_prob: Range(0.0, 0.0),
            direction_reversal_prob: Range(0.25, 0.45),
            speed_jitter: Range(0.2, 0.4),
            speed_factor: Range(0.6, 1.0),
            size_scale: Range(0.85, 1.15),
            slant: Range(-0.2, 0.2),
        }
    }

    pub fn sample_profile(&self, writer_id: String, group: Group, seed: u64) -> WriterProfile {
        let mut r = rng::stream(rng::derive(seed, 1));
        WriterProfile {
            writer_id,
            group,
            tremor_amp_mm: self.tremor_amp_mm.sample(&mut r),
            wobble_hz: self.wobble_hz.sample(&mut r),
            segment_drop_prob: self.segment_drop_prob.sample(&mut r),
            direction_reversal_prob: self.direction_reversal_prob.sample(&mut r),
            speed_jitter: self.speed_jitter.sample(&mut r),
            speed_factor: self.speed_factor.sample(&mut r),
            size_scale: self.size_scale.sample(&mut r),
            slant: self.slant.sample(&mut r),
            origin_mm: (Range(20.0, 120.0).sample(&mut r), Range(20.0, 180.0).sample(&mut r)),
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub td_count: usize,
    pub dysgraphic_count: usize,
    pub repetitions_per_glyph: usize,
    pub sampling_hz: f64,
    pub master_seed: u64,
    pub td_ranges: GroupRanges,
    pub dysgraphic_ranges: GroupRanges,
}

impl CorpusConfig {
    pub fn new(td_count: usize, dysgraphic_count: usize, master_seed: u64) -> Self {
        CorpusConfig {
            td_count,
            dysgraphic_count,
            repetitions_per_glyph: 1,
            sampling_hz: 200.0,
            master_seed,
            td_ranges: GroupRanges::typically_developing(),
            dysgraphic_ranges: GroupRanges::dysgraphic(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct TimedSegment {
    from: (f64, f64),
    to: (f64, f64),
    start_ms: f64,
    end_ms: f64,
    pen_down: bool,
}

pub struct Synthesizer {
    bank: TemplateBank,
    sampling_hz: f64,
}

impl Default for Synthesizer {
    fn default() -> Self {
        Synthesizer::new(TemplateBank::builtin(), 200.0)
    }
}

impl Synthesizer {
    pub fn new(bank: TemplateBank, sampling_hz: f64) -> Self {
        Synthesizer { bank, sampling_hz }
    }

    pub fn bank(&self) -> &TemplateBank {
        &self.bank
    }

    /// One recording of `glyph` by `profile`; a pure function of
    /// `(profile, glyph, instance_seed)`.
    pub fn synthesize(&self, profile: &WriterProfile, glyph: GlyphClass, instance_seed: u64) -> Result<GlyphRecording, SynthError> {
        if glyph.is_star() {
            return Err(SynthError::StarRequested);
        }
        let template = self.bank.get(glyph)?;
        let mut r = rng::stream(rng::derive(profile.seed, instance_seed));
        let segments = self.plan(template, profile, &mut r);

        let phase_x = r.random::<f64>() * std::f64::consts::TAU;
        let phase_y = r.random::<f64>() * std::f64::consts::TAU;
        let noise = Normal::new(0.0, 1.0).expect("unit normal");
        let noise_sd = 0.25 * profile.tremor_amp_mm;

        let dt = 1000.0 / self.sampling_hz;
        let total = segments.last().map_or(0.0, |s| s.end_ms);
        let count = (total / dt + 1e-9).floor() as usize + 1;
        let mut samples = Vec::with_capacity(count);
        let mut seg = 0;
        for k in 0..count {
            let t = k as f64 * dt;
            while seg + 1 < segments.len() && t >= segments[seg].end_ms - 1e-9 {
                seg += 1;
            }
            let s = &segments[seg];
            let span = s.end_ms - s.start_ms;
            let u = if span > 0.0 { ((t - s.start_ms) / span).clamp(0.0, 1.0) } else { 1.0 };
            let at_start = (t - s.start_ms).abs() < 1e-9;
            let pen_down = s.pen_down || (at_start && seg > 0 && segments[seg - 1].pen_down);
            let (mut x, mut y) = (s.from.0 + (s.to.0 - s.from.0) * u, s.from.1 + (s.to.1 - s.from.1) * u);
            let w = std::f64::consts::TAU * profile.wobble_hz * t / 1000.0;
            let (nx, ny): (f64, f64) = (noise.sample(&mut r), noise.sample(&mut r));
            if profile.tremor_amp_mm > 0.0 {
                x += profile.tremor_amp_mm * (w + phase_x).sin() + noise_sd * nx;
                y += profile.tremor_amp_mm * (w + phase_y).sin() + noise_sd * ny;
            }
            samples.push(SamplePoint::new(t, x, y, pen_down));
        }
        Ok(GlyphRecording {
            child_id: profile.writer_id.clone(),
            group: profile.group,
            requested: glyph,
            samples,
            meta: RecordingMeta { sampling_hz: self.sampling_hz, resolution_mm: 0.25 },
        })
    }

    /// Lays the (possibly reversed, possibly gapped) strokes out in time.
    fn plan(&self, template: &GlyphTemplate, profile: &WriterProfile, r: &mut StreamRng) -> Vec<TimedSegment> {
        let place = |(x, y): (f64, f64)| {
            (
                profile.origin_mm.0 + profile.size_scale * (x + profile.slant * y),
                profile.origin_mm.1 + profile.size_scale * y,
            )
        };
        let mm_per_ms = template.path_length() / template.nominal_duration_ms * profile.speed_factor;
        let duration = |len: f64, r: &mut StreamRng| {
            let jitter = 1.0 + profile.speed_jitter * (2.0 * r.random::<f64>() - 1.0);
            let raw = len / mm_per_ms * jitter.max(0.2);
            ((raw / TIME_QUANTUM_MS).round() * TIME_QUANTUM_MS).max(TIME_QUANTUM_MS)
        };

        let mut strokes = template.strokes();
        for stroke in &mut strokes {
            if r.random::<f64>() < profile.direction_reversal_prob {
                stroke.reverse();
            }
        }
        let mut out: Vec<TimedSegment> = Vec::new();
        let mut clock = 0.0;
        let mut push = |from, to, pen_down, dur: f64, out: &mut Vec<TimedSegment>| {
            out.push(TimedSegment { from, to, start_ms: clock, end_ms: clock + dur, pen_down });
            clock += dur;
        };
        for (si, stroke) in strokes.iter().enumerate() {
            if si > 0 {
                let prev = strokes[si - 1][strokes[si - 1].len() - 1];
                let len = dist(prev, stroke[0]);
                let d = duration(len, r);
                push(place(prev), place(stroke[0]), false, d, &mut out);
            }
            if stroke.len() == 1 {
                let d = duration(0.0, r);
                push(place(stroke[0]), place(stroke[0]), true, d, &mut out);
            }
            for w in stroke.windows(2) {
                let dropped = r.random::<f64>() < profile.segment_drop_prob;
                let d = duration(dist(w[0], w[1]), r);
                push(place(w[0]), place(w[1]), !dropped, d, &mut out);
            }
        }
        if !out.iter().any(|s| s.pen_down) {
            // everything dropped: keep the longest segment so some ink remains
            let longest = (0..out.len())
                .max_by(|&a, &b| dist(out[a].from, out[a].to).total_cmp(&dist(out[b].from, out[b].to)))
                .expect("template has segments");
            out[longest].pen_down = true;
        }
        out
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt()
}

/// [`Synthesizer::synthesize`] with the builtin bank at 200 Hz.
pub fn synthesize_glyph(profile: &WriterProfile, glyph: GlyphClass, instance_seed: u64) -> Result<GlyphRecording, SynthError> {
    Synthesizer::default().synthesize(profile, glyph, instance_seed)
}

/// Writers in corpus order: TD first, then dysgraphic.
pub fn corpus_profiles(config: &CorpusConfig) -> Vec<WriterProfile> {
    let td = (0..config.td_count).map(|i| (format!("td-{:04}", i + 1), Group::TypicallyDeveloping, &config.td_ranges));
    let dys = (0..config.dysgraphic_count).map(|i| (format!("dys-{:04}", i + 1), Group::Dysgraphic, &config.dysgraphic_ranges));
    td.chain(dys)
        .enumerate()
        .map(|(w, (id, group, ranges))| ranges.sample_profile(id, group, rng::derive(config.master_seed, w as u64)))
        .collect()
}

pub fn generate_corpus(config: &CorpusConfig) -> Result<Vec<GlyphRecording>, SynthError> {
    generate_corpus_with(&Synthesizer::new(TemplateBank::builtin(), config.sampling_hz), config)
}

/// One recording per glyph per repetition for each writer.
pub fn generate_corpus_with(synth: &Synthesizer, config: &CorpusConfig) -> Result<Vec<GlyphRecording>, SynthError> {
    synth.bank().covers_all_glyphs()?;
    let mut out = Vec::with_capacity((config.td_count + config.dysgraphic_count) * 36 * config.repetitions_per_glyph);
    for profile in corpus_profiles(config) {
        profile.validate()?;
        for rep in 0..config.repetitions_per_glyph {
            for glyph in GlyphClass::real() {
                let instance = (rep * GlyphClass::COUNT + glyph.index()) as u64;
                out.push(synth.synthesize(&profile, glyph, instance)?);
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub config: CorpusConfig,
    pub writers: usize,
    pub recordings: usize,
    pub sha256: String,
}

pub fn corpus_manifest(config: &CorpusConfig, recordings: usize, file_bytes: &[u8]) -> CorpusManifest {
    CorpusManifest {
        config: config.clone(),
        writers: config.td_count + config.dysgraphic_count,
        recordings,
        sha256: hex::encode(Sha256::digest(file_bytes)),
    }
}
