//! Child-level screening: score each requested glyph by the probability the
//! recognizer gives it, average into D, and compare D with a threshold
//! calibrated on typically-developing validation children.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::glyph::{GlyphClass, GlyphRecording, Group};
use crate::recognizer::{ConfusionMatrix, RecognizerError, TrainedRecognizer};

/// Share of the population the threshold places below it.
pub const DYSGRAPHIA_RATE: f64 = 0.086;
pub const MIN_CALIBRATION_CHILDREN: usize = 12;
pub const DEFAULT_SUBSET_SIZE: usize = 15;

#[derive(Debug, Error)]
pub enum DiagnosisError {
    #[error("missing glyphs: {}", format_glyphs(.0))]
    MissingGlyphs(Vec<GlyphClass>),
    #[error("missing scores for: {}", format_glyphs(.0))]
    MissingScores(Vec<GlyphClass>),
    #[error("calibration needs at least {MIN_CALIBRATION_CHILDREN} values, got {0}")]
    TooFewValues(usize),
    #[error("no {0} children to average")]
    EmptyGroup(Group),
    #[error("subset of {0} glyphs requested, only 36 exist")]
    SubsetTooLarge(usize),
    #[error("ranking for fold {0} is missing")]
    MissingRanking(usize),
    #[error("ranking does not cover all 36 glyphs")]
    IncompleteRanking,
    #[error("no evaluation examples of '{0}'")]
    EmptyRow(GlyphClass),
    #[error("pair confusion needs two different glyphs")]
    SameGlyph,
    #[error(transparent)]
    Recognizer(#[from] RecognizerError),
}

fn format_glyphs(glyphs: &[GlyphClass]) -> String {
    glyphs.iter().map(|g| g.as_char().to_string()).collect::<Vec<_>>().join(", ")
}

/// One child's dictation: a recording per requested glyph and, once scored,
/// the probability the recognizer gave the requested glyph.
#[derive(Clone, Debug, PartialEq)]
pub struct ChildSession {
    pub child_id: String,
    pub group: Group,
    pub recordings: BTreeMap<GlyphClass, GlyphRecording>,
    pub scores: BTreeMap<GlyphClass, f64>,
    /// Glyphs whose trace was unusable and scored uniform.
    pub degenerate: BTreeSet<GlyphClass>,
}

impl ChildSession {
    pub fn new(child_id: &str, group: Group) -> Self {
        ChildSession {
            child_id: child_id.to_string(),
            group,
            recordings: BTreeMap::new(),
            scores: BTreeMap::new(),
            degenerate: BTreeSet::new(),
        }
    }

    /// Groups recordings by child, in order of first appearance. A repeated
    /// glyph keeps its first recording; star recordings are ignored.
    pub fn from_recordings(recs: &[GlyphRecording]) -> Vec<ChildSession> {
        let mut order: Vec<String> = Vec::new();
        let mut by_child: BTreeMap<String, ChildSession> = BTreeMap::new();
        for r in recs.iter().filter(|r| !r.requested.is_star()) {
            let s = by_child.entry(r.child_id.clone()).or_insert_with(|| {
                order.push(r.child_id.clone());
                ChildSession::new(&r.child_id, r.group)
            });
            s.recordings.entry(r.requested).or_insert_with(|| r.clone());
        }
        order.into_iter().map(|id| by_child.remove(&id).expect("child seen")).collect()
    }

    pub fn missing_recordings(&self, glyphs: &[GlyphClass]) -> Vec<GlyphClass> {
        glyphs.iter().copied().filter(|g| !self.recordings.contains_key(g)).collect()
    }
}

/// The 36 glyphs a child is asked to write.
pub fn full_glyph_set() -> Vec<GlyphClass> {
    GlyphClass::real().collect()
}

/// Scores the recordings for `glyphs` (all 36 when `None`).
pub fn score_session(model: &TrainedRecognizer, session: &ChildSession, glyphs: Option<&[GlyphClass]>) -> Result<ChildSession, DiagnosisError> {
    let wanted = glyphs.map_or_else(full_glyph_set, <[GlyphClass]>::to_vec);
    let missing = session.missing_recordings(&wanted);
    if !missing.is_empty() {
        return Err(DiagnosisError::MissingGlyphs(missing));
    }
    let mut out = session.clone();
    for g in wanted {
        let p = model.predict_proba(&session.recordings[&g])?;
        out.scores.insert(g, p.probs[g.index()]);
        if p.degenerate {
            out.degenerate.insert(g);
        } else {
            out.degenerate.remove(&g);
        }
    }
    Ok(out)
}

/// Mean score over the 36 glyphs.
pub fn d_statistic(session: &ChildSession) -> Result<f64, DiagnosisError> {
    d_statistic_subset(session, &full_glyph_set())
}

/// Mean score over `subset`, summed in glyph-index order so that any
/// ordering of the same set gives the same bits.
pub fn d_statistic_subset(session: &ChildSession, subset: &[GlyphClass]) -> Result<f64, DiagnosisError> {
    let set: BTreeSet<GlyphClass> = subset.iter().copied().collect();
    let missing: Vec<GlyphClass> = set.iter().copied().filter(|g| !session.scores.contains_key(g)).collect();
    if !missing.is_empty() || set.is_empty() {
        return Err(DiagnosisError::MissingScores(missing));
    }
    Ok(set.iter().map(|g| session.scores[g]).sum::<f64>() / set.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub threshold: f64,
    pub rate: f64,
    /// Fold whose validation children produced the threshold, if any.
    pub fold: Option<usize>,
    pub validation_d: Vec<f64>,
}

/// τ is the (k+1)-th smallest value with k = round(rate·N), so with
/// distinct values exactly k lie strictly below it.
pub fn calibrate_threshold(valid_ds: &[f64], rate: f64) -> Result<Calibration, DiagnosisError> {
    if valid_ds.len() < MIN_CALIBRATION_CHILDREN {
        return Err(DiagnosisError::TooFewValues(valid_ds.len()));
    }
    let mut sorted = valid_ds.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = (rate * sorted.len() as f64).round() as usize;
    Ok(Calibration { threshold: sorted[k.min(sorted.len() - 1)], rate, fold: None, validation_d: valid_ds.to_vec() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Dysgraphic,
    NonDysgraphic,
}

/// Dysgraphic iff `d < τ`; a tie is non-dysgraphic.
pub fn verdict(d: f64, cal: &Calibration) -> Verdict {
    if d < cal.threshold {
        Verdict::Dysgraphic
    } else {
        Verdict::NonDysgraphic
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubsetMode {
    Full36,
    Discriminative15,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisReport {
    pub child_id: String,
    pub d: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    pub scores: BTreeMap<GlyphClass, f64>,
    pub mode: SubsetMode,
    pub subset: Vec<GlyphClass>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degenerate: Vec<GlyphClass>,
}

/// Report for a scored session over `subset` against `cal`.
pub fn diagnose(session: &ChildSession, subset: &[GlyphClass], mode: SubsetMode, cal: &Calibration) -> Result<DiagnosisReport, DiagnosisError> {
    let d = d_statistic_subset(session, subset)?;
    let set: BTreeSet<GlyphClass> = subset.iter().copied().collect();
    Ok(DiagnosisReport {
        child_id: session.child_id.clone(),
        d,
        threshold: cal.threshold,
        verdict: verdict(d, cal),
        scores: session.scores.iter().filter(|(g, _)| set.contains(g)).map(|(g, s)| (*g, *s)).collect(),
        mode,
        subset: set.iter().copied().collect(),
        degenerate: session.degenerate.iter().copied().filter(|g| set.contains(g)).collect(),
    })
}

/// Per-glyph mean score over the scored children of `group`.
pub fn glyph_level_means(sessions: &[ChildSession], group: Group) -> Result<BTreeMap<GlyphClass, f64>, DiagnosisError> {
    let members: Vec<&ChildSession> = sessions.iter().filter(|s| s.group == group).collect();
    if members.is_empty() {
        return Err(DiagnosisError::EmptyGroup(group));
    }
    let mut sums: BTreeMap<GlyphClass, (f64, usize)> = BTreeMap::new();
    for s in members {
        for (g, v) in &s.scores {
            let e = sums.entry(*g).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    Ok(sums.into_iter().map(|(g, (sum, n))| (g, sum / n as f64)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub glyph: GlyphClass,
    pub td_mean: f64,
    pub dys_mean: f64,
    pub gap: f64,
}

/// Glyphs ordered by how much harder they are for dysgraphic writers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminativeRanking {
    pub entries: Vec<RankEntry>,
}

impl DiscriminativeRanking {
    pub fn top(&self, k: usize) -> Vec<GlyphClass> {
        self.entries.iter().take(k).map(|e| e.glyph).collect()
    }

    /// CSV with columns glyph, td_mean, dys_mean, gap.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["glyph", "td_mean", "dys_mean", "gap"])?;
        for e in &self.entries {
            w.write_record([e.glyph.as_char().to_string(), e.td_mean.to_string(), e.dys_mean.to_string(), e.gap.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Gap = TD mean − dysgraphic mean, descending; ties by glyph index.
pub fn rank_discriminative(
    td_means: &BTreeMap<GlyphClass, f64>,
    dys_means: &BTreeMap<GlyphClass, f64>,
) -> Result<DiscriminativeRanking, DiagnosisError> {
    let mut entries = Vec::with_capacity(GlyphClass::REAL_COUNT);
    for g in GlyphClass::real() {
        let (Some(&td), Some(&dys)) = (td_means.get(&g), dys_means.get(&g)) else {
            return Err(DiagnosisError::IncompleteRanking);
        };
        entries.push(RankEntry { glyph: g, td_mean: td, dys_mean: dys, gap: td - dys });
    }
    entries.sort_by(|a, b| b.gap.total_cmp(&a.gap).then(a.glyph.cmp(&b.glyph)));
    Ok(DiscriminativeRanking { entries })
}

/// Fold `i` uses the top `k` glyphs of fold `(i + 1) mod n`'s ranking, so
/// each ranking serves exactly one other fold.
pub fn subset_for_fold(rankings: &[DiscriminativeRanking], fold_index: usize, k: usize) -> Result<Vec<GlyphClass>, DiagnosisError> {
    if k > GlyphClass::REAL_COUNT {
        return Err(DiagnosisError::SubsetTooLarge(k));
    }
    if k == GlyphClass::REAL_COUNT {
        return Ok(full_glyph_set());
    }
    if fold_index >= rankings.len() {
        return Err(DiagnosisError::MissingRanking(fold_index));
    }
    let source = (fold_index + 1) % rankings.len();
    let ranking = &rankings[source];
    if ranking.entries.len() != GlyphClass::REAL_COUNT {
        return Err(DiagnosisError::IncompleteRanking);
    }
    Ok(ranking.top(k))
}

/// Mean of the two directed misclassification rates between `a` and `b`.
pub fn pair_confusion(cm: &ConfusionMatrix, a: GlyphClass, b: GlyphClass) -> Result<f64, DiagnosisError> {
    if a == b {
        return Err(DiagnosisError::SameGlyph);
    }
    let (na, nb) = (cm.row_total(a), cm.row_total(b));
    if na == 0 {
        return Err(DiagnosisError::EmptyRow(a));
    }
    if nb == 0 {
        return Err(DiagnosisError::EmptyRow(b));
    }
    // sum in a fixed (index) order so the value is symmetric to the bit
    let (lo, hi, nlo, nhi) = if a < b { (a, b, na, nb) } else { (b, a, nb, na) };
    Ok((cm.get(lo, hi) as f64 / nlo as f64 + cm.get(hi, lo) as f64 / nhi as f64) / 2.0)
}
