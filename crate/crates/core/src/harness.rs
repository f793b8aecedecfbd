//! K-fold cross-validation of the whole screening pipeline and the CSV
//! artifacts derived from it.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::{augment_training_set, AugmentError};
use crate::diagnosis::{
    calibrate_threshold, d_statistic, d_statistic_subset, glyph_level_means, pair_confusion, rank_discriminative, score_session,
    subset_for_fold, verdict, Calibration, ChildSession, DiagnosisError, DiscriminativeRanking, Verdict, DEFAULT_SUBSET_SIZE,
    DYSGRAPHIA_RATE, MIN_CALIBRATION_CHILDREN,
};
use crate::glyph::{split_dataset, DatasetSplit, GlyphClass, GlyphError, GlyphRecording, Group, DEFAULT_FOLD_COUNT};
use crate::recognizer::{
    train_with, ConfusionMatrix, EpochRecord, ModelDocument, PreprocessConfig, RecognizerError, RecognizerKind, TrainedRecognizer,
    TrainingHyper,
};
use crate::rng;

pub const REPORT_FORMAT: &str = "glyphscreen-cv-report";
pub const BUNDLE_FORMAT: &str = "glyphscreen-model-bundle";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("need at least {folds} typically developing children, got {td}")]
    TooFewChildren { td: usize, folds: usize },
    #[error("corpus has no dysgraphic children")]
    NoDysgraphic,
    #[error(transparent)]
    Split(#[from] GlyphError),
    #[error("fold {fold}: {source}")]
    Augment { fold: usize, source: AugmentError },
    #[error("fold {fold}: {source}")]
    Train { fold: usize, source: RecognizerError },
    #[error("fold {fold}: {source}")]
    Diagnosis { fold: usize, source: DiagnosisError },
    #[error("{0} reports have different fold counts")]
    FoldMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub kind: RecognizerKind,
    pub hyper: TrainingHyper,
    pub preprocess: PreprocessConfig,
    pub folds: usize,
    pub star_fraction: f64,
    /// Master seed. The split uses it directly; fold `i` trains with
    /// `seed + i`.
    pub seed: u64,
    pub subset_size: usize,
    /// Worker threads for folds; 0 means one per available core.
    #[serde(skip)]
    pub threads: usize,
}

impl CvConfig {
    pub fn new(kind: RecognizerKind, seed: u64) -> Self {
        CvConfig {
            kind,
            hyper: TrainingHyper::default(),
            preprocess: PreprocessConfig::default(),
            folds: DEFAULT_FOLD_COUNT,
            star_fraction: 1.0,
            seed,
            subset_size: DEFAULT_SUBSET_SIZE,
            threads: 1,
        }
    }

    pub fn fold_seed(&self, fold: usize) -> u64 {
        self.seed.wrapping_add(fold as u64)
    }
}

/// One scored child within one fold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChildScore {
    pub child_id: String,
    pub group: Group,
    pub d_full: f64,
    pub d_subset: f64,
    pub scores: BTreeMap<GlyphClass, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degenerate: Vec<GlyphClass>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub seed: u64,
    pub model_id: String,
    pub training_children: Vec<String>,
    pub validation_children: Vec<String>,
    pub dysgraphic_children: Vec<String>,
    pub training_recordings: usize,
    pub star_hybrids: usize,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub restarts: usize,
    pub validation: Vec<ChildScore>,
    pub dysgraphic: Vec<ChildScore>,
    /// Absent when the fold has fewer validation children than calibration
    /// needs; detection rates are then absent too.
    pub calibration: Option<Calibration>,
    pub detection_rate: Option<f64>,
    pub subset: Vec<GlyphClass>,
    pub subset_calibration: Option<Calibration>,
    pub subset_detection_rate: Option<f64>,
    /// Ranking built from this fold's own scores; it feeds the subset of
    /// fold `(fold + folds - 1) mod folds`.
    pub ranking: DiscriminativeRanking,
    pub td_glyph_means: BTreeMap<GlyphClass, f64>,
    pub dys_glyph_means: BTreeMap<GlyphClass, f64>,
    /// Validation recordings only.
    pub confusion: ConfusionMatrix,
}

impl FoldReport {
    pub fn validation_d(&self) -> Vec<f64> {
        self.validation.iter().map(|c| c.d_full).collect()
    }

    pub fn dysgraphic_d(&self) -> Vec<f64> {
        self.dysgraphic.iter().map(|c| c.d_full).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChildAggregate {
    pub child_id: String,
    pub group: Group,
    pub folds: usize,
    pub mean_d: f64,
    pub std_d: f64,
    pub mean_d_subset: f64,
    pub std_d_subset: f64,
    /// Verdict most folds agree on, over calibrated folds; ties go to
    /// non-dysgraphic.
    pub majority_verdict: Option<Verdict>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub mean_detection_rate: Option<f64>,
    pub std_detection_rate: Option<f64>,
    pub mean_subset_detection_rate: Option<f64>,
    pub std_subset_detection_rate: Option<f64>,
    pub validation_accuracy: f64,
    /// Glyphs whose fold-averaged TD mean is below the dysgraphic mean.
    pub scatter_violations: Vec<GlyphClass>,
    pub children: Vec<ChildAggregate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub format: String,
    pub config: CvConfig,
    pub folds: Vec<FoldReport>,
    pub summary: CvSummary,
}

impl CvReport {
    pub fn merged_confusion(&self) -> ConfusionMatrix {
        let mut cm = ConfusionMatrix::new();
        for f in &self.folds {
            cm.merge(&f.confusion);
        }
        cm
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Everything the screening service needs from one fold: the network, its
/// calibrations, and the rankings behind the 15-glyph mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format: String,
    pub model_id: String,
    pub model: ModelDocument,
    pub calibration: Option<Calibration>,
    pub subset: Vec<GlyphClass>,
    pub subset_calibration: Option<Calibration>,
    pub ranking: DiscriminativeRanking,
}

impl ModelBundle {
    pub fn new(fold: &FoldReport, model: &TrainedRecognizer) -> Self {
        ModelBundle {
            format: BUNDLE_FORMAT.into(),
            model_id: fold.model_id.clone(),
            model: model.to_document(),
            calibration: fold.calibration.clone(),
            subset: fold.subset.clone(),
            subset_calibration: fold.subset_calibration.clone(),
            ranking: fold.ranking.clone(),
        }
    }
}

pub struct CvOutcome {
    pub report: CvReport,
    /// Trained model per fold, in fold order.
    pub models: Vec<TrainedRecognizer>,
}

/// Share of `dys_d` strictly below `τ`.
pub fn detection_rate_of(dys_d: &[f64], cal: &Calibration) -> Option<f64> {
    if dys_d.is_empty() {
        return None;
    }
    Some(dys_d.iter().filter(|&&d| verdict(d, cal) == Verdict::Dysgraphic).count() as f64 / dys_d.len() as f64)
}

/// Detection rate of one fold, `None` if the fold is missing or uncalibrated.
pub fn detection_rate(report: &CvReport, fold: usize) -> Option<f64> {
    let f = report.folds.get(fold)?;
    detection_rate_of(&f.dysgraphic_d(), f.calibration.as_ref()?)
}

struct FoldResult {
    report: FoldReport,
    model: TrainedRecognizer,
    sessions: Vec<ChildSession>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn child_score(session: &ChildSession) -> Result<ChildScore, DiagnosisError> {
    Ok(ChildScore {
        child_id: session.child_id.clone(),
        group: session.group,
        d_full: d_statistic(session)?,
        d_subset: f64::NAN,
        scores: session.scores.clone(),
        degenerate: session.degenerate.iter().copied().collect(),
    })
}

fn calibrate(values: &[f64], fold: usize) -> Option<Calibration> {
    if values.len() < MIN_CALIBRATION_CHILDREN {
        return None;
    }
    let mut cal = calibrate_threshold(values, DYSGRAPHIA_RATE).ok()?;
    cal.fold = Some(fold);
    Some(cal)
}

/// The recordings one fold trains and validates on.
pub struct FoldData {
    pub split: DatasetSplit,
    /// Training recordings followed by the star hybrids made from them.
    pub train: Vec<GlyphRecording>,
    pub star_hybrids: usize,
    pub validation: Vec<GlyphRecording>,
    pub dysgraphic: Vec<GlyphRecording>,
    /// Training seed for the fold.
    pub hyper: TrainingHyper,
}

/// Splits `corpus` for `fold` and adds the star hybrids to its training set.
pub fn fold_data(corpus: &[GlyphRecording], config: &CvConfig, fold: usize) -> Result<FoldData, HarnessError> {
    let children: Vec<(String, Group)> = corpus.iter().map(|r| (r.child_id.clone(), r.group)).collect();
    let split = split_dataset(&children, config.folds, fold, config.seed)?;
    let pick = |ids: &BTreeSet<String>| -> Vec<GlyphRecording> {
        corpus.iter().filter(|r| ids.contains(&r.child_id) && !r.requested.is_star()).cloned().collect()
    };
    let (train_recs, validation, dysgraphic) =
        (pick(&split.training_children), pick(&split.validation_children), pick(&split.dysgraphic_children));

    let fold_seed = config.fold_seed(fold);
    let train = augment_training_set(&train_recs, config.star_fraction, rng::derive(fold_seed, 0xA06))
        .map_err(|source| HarnessError::Augment { fold, source })?;
    Ok(FoldData {
        split,
        star_hybrids: train.len() - train_recs.len(),
        train,
        validation,
        dysgraphic,
        hyper: TrainingHyper { seed: fold_seed, ..config.hyper },
    })
}

fn run_fold(corpus: &[GlyphRecording], config: &CvConfig, fold: usize) -> Result<FoldResult, HarnessError> {
    let FoldData { split, train: augmented, star_hybrids, validation: valid_recs, dysgraphic: dys_recs, hyper } =
        fold_data(corpus, config, fold)?;
    let model = train_with(config.kind, &augmented, &valid_recs, hyper, config.preprocess, |_| {})
        .map_err(|source| HarnessError::Train { fold, source })?;

    let diag = |source| HarnessError::Diagnosis { fold, source };
    let mut sessions = Vec::new();
    for s in ChildSession::from_recordings(&valid_recs).iter().chain(&ChildSession::from_recordings(&dys_recs)) {
        sessions.push(score_session(&model, s, None).map_err(diag)?);
    }
    let mut validation = Vec::new();
    let mut dysgraphic = Vec::new();
    for s in &sessions {
        let score = child_score(s).map_err(diag)?;
        match s.group {
            Group::TypicallyDeveloping => validation.push(score),
            Group::Dysgraphic => dysgraphic.push(score),
        }
    }
    validation.sort_by(|a, b| a.child_id.cmp(&b.child_id));
    dysgraphic.sort_by(|a, b| a.child_id.cmp(&b.child_id));

    let td_glyph_means = glyph_level_means(&sessions, Group::TypicallyDeveloping).map_err(diag)?;
    let dys_glyph_means = glyph_level_means(&sessions, Group::Dysgraphic).map_err(diag)?;
    let ranking = rank_discriminative(&td_glyph_means, &dys_glyph_means).map_err(diag)?;
    let calibration = calibrate(&validation.iter().map(|c| c.d_full).collect::<Vec<_>>(), fold);
    let detection_rate = calibration.as_ref().and_then(|c| detection_rate_of(&dysgraphic.iter().map(|c| c.d_full).collect::<Vec<_>>(), c));
    let confusion = model.confusion_matrix(&valid_recs).map_err(|source| HarnessError::Train { fold, source })?;

    let report = FoldReport {
        fold,
        seed: hyper.seed,
        model_id: format!("{}-fold{fold}", config.kind),
        training_children: split.training_children.into_iter().collect(),
        validation_children: split.validation_children.into_iter().collect(),
        dysgraphic_children: split.dysgraphic_children.into_iter().collect(),
        training_recordings: augmented.len(),
        star_hybrids,
        history: model.history.clone(),
        best_epoch: model.best_epoch,
        restarts: model.restarts,
        validation,
        dysgraphic,
        calibration,
        detection_rate,
        subset: Vec::new(),
        subset_calibration: None,
        subset_detection_rate: None,
        ranking,
        td_glyph_means,
        dys_glyph_means,
        confusion,
    };
    Ok(FoldResult { report, model, sessions })
}

fn run_folds(corpus: &[GlyphRecording], config: &CvConfig) -> Vec<Result<FoldResult, HarnessError>> {
    let threads = match config.threads {
        0 => std::thread::available_parallelism().map_or(1, usize::from),
        n => n,
    }
    .min(config.folds)
    .max(1);
    if threads == 1 {
        return (0..config.folds).map(|f| run_fold(corpus, config, f)).collect();
    }
    let mut slots: Vec<Option<Result<FoldResult, HarnessError>>> = (0..config.folds).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|w| {
                scope.spawn(move || {
                    (w..config.folds).step_by(threads).map(|f| (f, run_fold(corpus, config, f))).collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (f, r) in h.join().expect("fold worker panicked") {
                slots[f] = Some(r);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("every fold ran")).collect()
}

/// Trains and evaluates every fold, then applies the subset rotation, which
/// needs all folds' rankings.
pub fn run_cross_validation(corpus: &[GlyphRecording], config: &CvConfig) -> Result<CvOutcome, HarnessError> {
    let mut groups: BTreeMap<&str, Group> = BTreeMap::new();
    for r in corpus {
        groups.insert(&r.child_id, r.group);
    }
    let td = groups.values().filter(|g| **g == Group::TypicallyDeveloping).count();
    if td < config.folds {
        return Err(HarnessError::TooFewChildren { td, folds: config.folds });
    }
    if !groups.values().any(|g| *g == Group::Dysgraphic) {
        return Err(HarnessError::NoDysgraphic);
    }

    let mut results = Vec::with_capacity(config.folds);
    for r in run_folds(corpus, config) {
        results.push(r?);
    }
    let rankings: Vec<DiscriminativeRanking> = results.iter().map(|r| r.report.ranking.clone()).collect();
    for r in &mut results {
        let fold = r.report.fold;
        let diag = |source| HarnessError::Diagnosis { fold, source };
        let subset = subset_for_fold(&rankings, fold, config.subset_size).map_err(diag)?;
        let by_id: BTreeMap<&str, &ChildSession> = r.sessions.iter().map(|s| (s.child_id.as_str(), s)).collect();
        for c in r.report.validation.iter_mut().chain(r.report.dysgraphic.iter_mut()) {
            c.d_subset = d_statistic_subset(by_id[c.child_id.as_str()], &subset).map_err(diag)?;
        }
        let valid: Vec<f64> = r.report.validation.iter().map(|c| c.d_subset).collect();
        let dys: Vec<f64> = r.report.dysgraphic.iter().map(|c| c.d_subset).collect();
        r.report.subset_calibration = calibrate(&valid, fold);
        r.report.subset_detection_rate = r.report.subset_calibration.as_ref().and_then(|c| detection_rate_of(&dys, c));
        r.report.subset = subset;
    }

    let folds: Vec<FoldReport> = results.iter().map(|r| r.report.clone()).collect();
    let summary = summarize(&folds);
    let report = CvReport { format: REPORT_FORMAT.into(), config: *config, folds, summary };
    Ok(CvOutcome { report, models: results.into_iter().map(|r| r.model).collect() })
}

fn summarize(folds: &[FoldReport]) -> CvSummary {
    let stats = |values: Vec<f64>| if values.is_empty() { (None, None) } else { let (m, s) = mean_std(&values); (Some(m), Some(s)) };
    let (mean_detection_rate, std_detection_rate) = stats(folds.iter().filter_map(|f| f.detection_rate).collect());
    let (mean_subset_detection_rate, std_subset_detection_rate) = stats(folds.iter().filter_map(|f| f.subset_detection_rate).collect());

    let mut merged = ConfusionMatrix::new();
    for f in folds {
        merged.merge(&f.confusion);
    }

    struct Acc {
        group: Group,
        full: Vec<f64>,
        subset: Vec<f64>,
        dys_votes: usize,
        votes: usize,
    }
    let mut by_child: BTreeMap<&str, Acc> = BTreeMap::new();
    for f in folds {
        for c in f.validation.iter().chain(&f.dysgraphic) {
            let a = by_child.entry(&c.child_id).or_insert(Acc { group: c.group, full: Vec::new(), subset: Vec::new(), dys_votes: 0, votes: 0 });
            a.full.push(c.d_full);
            a.subset.push(c.d_subset);
            if let Some(cal) = &f.calibration {
                a.votes += 1;
                if verdict(c.d_full, cal) == Verdict::Dysgraphic {
                    a.dys_votes += 1;
                }
            }
        }
    }
    let children = by_child
        .into_iter()
        .map(|(id, a)| {
            let (mean_d, std_d) = mean_std(&a.full);
            let (mean_d_subset, std_d_subset) = mean_std(&a.subset);
            let majority_verdict = (a.votes > 0).then(|| if 2 * a.dys_votes > a.votes { Verdict::Dysgraphic } else { Verdict::NonDysgraphic });
            ChildAggregate { child_id: id.to_string(), group: a.group, folds: a.full.len(), mean_d, std_d, mean_d_subset, std_d_subset, majority_verdict }
        })
        .collect();

    let scatter_violations = scatter_rows(folds).into_iter().filter(|r| r.td_mean < r.dys_mean).map(|r| r.glyph).collect();
    CvSummary {
        mean_detection_rate,
        std_detection_rate,
        mean_subset_detection_rate,
        std_subset_detection_rate,
        validation_accuracy: merged.accuracy(),
        scatter_violations,
        children,
    }
}

/// One line of the quantile CSV. Child rows place each child of a group at
/// quantile `(i + 0.5)/n` after sorting by fold-averaged D; threshold rows
/// carry one fold's τ in `mean_d` and leave `quantile` empty. Validation
/// children appear in one fold, so their `std_d` is 0; dysgraphic children
/// are averaged over every fold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileRow {
    pub variant: String,
    pub kind: String,
    pub group: String,
    pub id: String,
    pub quantile: Option<f64>,
    pub mean_d: f64,
    pub std_d: f64,
    pub folds: usize,
}

pub fn quantile_rows(report: &CvReport) -> Vec<QuantileRow> {
    let mut rows = Vec::new();
    for variant in ["full36", "discriminative15"] {
        let subset = variant == "discriminative15";
        for group in [Group::TypicallyDeveloping, Group::Dysgraphic] {
            let mut members: Vec<(&str, f64, f64, usize)> = report
                .summary
                .children
                .iter()
                .filter(|c| c.group == group)
                .map(|c| if subset { (c.child_id.as_str(), c.mean_d_subset, c.std_d_subset, c.folds) } else { (c.child_id.as_str(), c.mean_d, c.std_d, c.folds) })
                .collect();
            members.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(b.0)));
            let n = members.len() as f64;
            for (i, (id, mean_d, std_d, folds)) in members.into_iter().enumerate() {
                rows.push(QuantileRow {
                    variant: variant.into(),
                    kind: "child".into(),
                    group: group.to_string(),
                    id: id.into(),
                    quantile: Some((i as f64 + 0.5) / n),
                    mean_d,
                    std_d,
                    folds,
                });
            }
        }
        for f in &report.folds {
            let cal = if subset { &f.subset_calibration } else { &f.calibration };
            if let Some(cal) = cal {
                rows.push(QuantileRow {
                    variant: variant.into(),
                    kind: "threshold".into(),
                    group: String::new(),
                    id: format!("fold{}", f.fold),
                    quantile: None,
                    mean_d: cal.threshold,
                    std_d: 0.0,
                    folds: 1,
                });
            }
        }
    }
    rows
}

fn write_rows<T: Serialize, W: Write>(out: W, rows: &[T]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<Vec<T>, _>>()?)
}

pub fn emit_quantile_data(report: &CvReport, path: &Path) -> Result<(), HarnessError> {
    write_rows(std::fs::File::create(path)?, &quantile_rows(report))
}

pub fn read_quantile_data(path: &Path) -> Result<Vec<QuantileRow>, HarnessError> {
    read_rows(path)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub glyph: GlyphClass,
    pub dys_mean: f64,
    pub td_mean: f64,
}

/// Per-glyph group means, each averaged over the folds in fold order.
pub fn scatter_rows(folds: &[FoldReport]) -> Vec<ScatterRow> {
    let avg = |pick: &dyn Fn(&FoldReport) -> Option<f64>| {
        let v: Vec<f64> = folds.iter().filter_map(pick).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    GlyphClass::real()
        .map(|g| ScatterRow {
            glyph: g,
            dys_mean: avg(&|f| f.dys_glyph_means.get(&g).copied()),
            td_mean: avg(&|f| f.td_glyph_means.get(&g).copied()),
        })
        .collect()
}

pub fn emit_discriminative_scatter(report: &CvReport, path: &Path) -> Result<(), HarnessError> {
    write_rows(std::fs::File::create(path)?, &scatter_rows(&report.folds))
}

pub fn read_discriminative_scatter(path: &Path) -> Result<Vec<ScatterRow>, HarnessError> {
    read_rows(path)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionRow {
    pub pair: String,
    pub rnn: f64,
    pub cnn: f64,
}

/// The `top` glyph pairs the CNN confuses most on fold-merged validation
/// matrices, ties broken by the pair's characters, with the RNN's value for
/// the same pair.
pub fn confusion_comparison(rnn: &CvReport, cnn: &CvReport, top: usize) -> Vec<ConfusionRow> {
    let (rcm, ccm) = (rnn.merged_confusion(), cnn.merged_confusion());
    let mut rows = Vec::new();
    let glyphs: Vec<GlyphClass> = GlyphClass::real().collect();
    for (i, &a) in glyphs.iter().enumerate() {
        for &b in &glyphs[i + 1..] {
            let (Ok(r), Ok(c)) = (pair_confusion(&rcm, a, b), pair_confusion(&ccm, a, b)) else { continue };
            rows.push(ConfusionRow { pair: format!("{}{}", a.as_char(), b.as_char()), rnn: r, cnn: c });
        }
    }
    rows.sort_by(|x, y| y.cnn.total_cmp(&x.cnn).then_with(|| x.pair.cmp(&y.pair)));
    rows.truncate(top);
    rows
}

pub fn emit_confusion_comparison(rnn: &CvReport, cnn: &CvReport, top: usize, path: &Path) -> Result<(), HarnessError> {
    if rnn.folds.len() != cnn.folds.len() {
        return Err(HarnessError::FoldMismatch(format!("rnn {} / cnn {}", rnn.folds.len(), cnn.folds.len())));
    }
    write_rows(std::fs::File::create(path)?, &confusion_comparison(rnn, cnn, top))
}

pub fn read_confusion_comparison(path: &Path) -> Result<Vec<ConfusionRow>, HarnessError> {
    read_rows(path)
}

pub const QUANTILE_FILE: &str = "quantiles.csv";
pub const SCATTER_FILE: &str = "discriminative.csv";
pub const CONFUSION_FILE: &str = "confusion.csv";
pub const REPORT_FILE: &str = "report.json";

/// Writes `<dir>/<kind>/{report.json, quantiles.csv, discriminative.csv}`
/// and one bundle per fold under `<dir>/models/`.
pub fn write_outcome(outcome: &CvOutcome, dir: &Path) -> Result<(), HarnessError> {
    let kind_dir = dir.join(outcome.report.config.kind.to_string());
    std::fs::create_dir_all(&kind_dir)?;
    std::fs::write(kind_dir.join(REPORT_FILE), outcome.report.to_json())?;
    emit_quantile_data(&outcome.report, &kind_dir.join(QUANTILE_FILE))?;
    emit_discriminative_scatter(&outcome.report, &kind_dir.join(SCATTER_FILE))?;
    let models = dir.join("models");
    std::fs::create_dir_all(&models)?;
    for (fold, model) in outcome.report.folds.iter().zip(&outcome.models) {
        let bundle = ModelBundle::new(fold, model);
        std::fs::write(models.join(format!("{}.json", bundle.model_id)), serde_json::to_string(&bundle)?)?;
    }
    Ok(())
}

/// Runs cross-validation for each kind and writes every artifact; with both
/// kinds present the confusion comparison is written to `<dir>/confusion.csv`.
pub fn evaluate(corpus: &[GlyphRecording], configs: &[CvConfig], dir: &Path) -> Result<Vec<CvReport>, HarnessError> {
    let mut reports = Vec::new();
    for config in configs {
        let outcome = run_cross_validation(corpus, config)?;
        write_outcome(&outcome, dir)?;
        reports.push(outcome.report);
    }
    let find = |k| reports.iter().find(|r| r.config.kind == k);
    if let (Some(rnn), Some(cnn)) = (find(RecognizerKind::Rnn), find(RecognizerKind::Cnn)) {
        emit_confusion_comparison(rnn, cnn, 6, &dir.join(CONFUSION_FILE))?;
    }
    Ok(reports)
}
