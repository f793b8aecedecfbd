//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Runs without the libtest harness so the
//! lines reach the terminal uncaptured.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::time::{Duration, Instant};

use glyphscreen_core::augment::{augment_training_set, make_star_hybrid, star_count, MIN_SOURCE_SAMPLES};
use glyphscreen_core::diagnosis::{calibrate_threshold, pair_confusion, subset_for_fold};
use glyphscreen_core::glyph::{normalize, GlyphRecording, Group};
use glyphscreen_core::harness::{evaluate, fold_data, run_cross_validation, CvConfig, CvOutcome, CvReport};
use glyphscreen_core::nn::{CnnConfig, CnnModel, ImageExample, RnnConfig, RnnModel, SequenceExample};
use glyphscreen_core::recognizer::{train, Network, RecognizerKind, TrainedRecognizer, TrainingHyper};
use glyphscreen_core::rng;
use glyphscreen_core::synth::{generate_corpus, CorpusConfig, TemplateBank};

/// Epoch cap for the full-corpus runs. Patience never triggers this early;
/// the cap keeps both cross-validations inside the time budget.
const EPOCHS: usize = 8;
const CORPUS_SEED: u64 = 7;
const CV_SEED: u64 = 7;
const BUDGET: Duration = Duration::from_secs(30 * 60);

struct Verdict {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn report_line(results: &mut Vec<(String, bool)>, name: &str, v: Verdict, took: Duration) {
    let mark = if v.pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "{mark}  {name}: {} ({:.1}s)", v.detail, took.as_secs_f64()).unwrap();
    out.flush().unwrap();
    results.push((name.to_string(), v.pass));
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

// ---- gradients ----

fn wave(len: usize, width: usize, phase: f64) -> Vec<f64> {
    (0..len * width).map(|i| ((i as f64) * 0.37 + phase).sin() * 0.5).collect()
}

/// Largest relative gap between `grads` and central differences of `loss`.
fn worst_relative_error(params: &mut [f64], grads: &[f64], loss: &mut dyn FnMut(&[f64]) -> f64) -> f64 {
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..params.len() {
        let orig = params[k];
        params[k] = orig + eps;
        let up = loss(params);
        params[k] = orig - eps;
        let down = loss(params);
        params[k] = orig;
        let numeric = (up - down) / (2.0 * eps);
        worst = worst.max((grads[k] - numeric).abs() / grads[k].abs().max(numeric.abs()).max(1e-6));
    }
    worst
}

fn flatten(model_params: &glyphscreen_core::nn::ParameterSet) -> Vec<f64> {
    model_params.tensors().iter().flat_map(|t| t.data().to_vec()).collect()
}

fn unflatten(target: &mut glyphscreen_core::nn::ParameterSet, flat: &[f64]) {
    let mut at = 0;
    for t in target.tensors_mut() {
        let n = t.len();
        t.data_mut().copy_from_slice(&flat[at..at + n]);
        at += n;
    }
}

fn gradient_fidelity() -> Verdict {
    let rnn = RnnModel::new(RnnConfig { input: 3, hidden: 8, layers: 2, head_hidden: 8, classes: 37, dropout_pct: 50 }, 0.5, 1);
    let seqs = [wave(12, 3, 0.0), wave(12, 3, 1.1), wave(7, 3, 2.3)];
    let batch: Vec<SequenceExample> =
        seqs.iter().enumerate().map(|(i, s)| SequenceExample { features: s, label: [0, 20, 36][i], dropout_seed: 9 + i as u64 }).collect();
    let (_, g) = rnn.loss_and_grad(&batch).unwrap();
    let mut probe = rnn.clone();
    let rnn_err = worst_relative_error(&mut flatten(&rnn.params), &flatten(&g), &mut |p| {
        unflatten(&mut probe.params, p);
        probe.loss_and_grad(&batch).unwrap().0
    });

    let cnn = CnnModel::new(CnnConfig { image: 8, conv1: 3, conv2: 4, kernel: 3, pad: 1, dense: 8, classes: 37, dropout_pct: 50 }, 0.5, 2);
    let imgs = [wave(8, 8, 0.2).iter().map(|v| v + 0.5).collect::<Vec<_>>(), wave(8, 8, 1.7).iter().map(|v| v + 0.5).collect()];
    let batch: Vec<ImageExample> =
        imgs.iter().enumerate().map(|(i, p)| ImageExample { pixels: p, label: [5, 36][i], dropout_seed: 3 + i as u64 }).collect();
    let (_, g) = cnn.loss_and_grad(&batch).unwrap();
    let mut probe = cnn.clone();
    let cnn_err = worst_relative_error(&mut flatten(&cnn.params), &flatten(&g), &mut |p| {
        unflatten(&mut probe.params, p);
        probe.loss_and_grad(&batch).unwrap().0
    });
    check(rnn_err < 1e-4 && cnn_err < 1e-4, format!("max relative error rnn {rnn_err:.2e}, cnn {cnn_err:.2e} (< 1e-4)"))
}

// ---- appendix values and early stopping ----

fn accuracy(model: &TrainedRecognizer, set: &[GlyphRecording]) -> f64 {
    set.iter().filter(|r| model.predict_proba(r).unwrap().argmax() == r.requested).count() as f64 / set.len() as f64
}

/// Early-stopping invariants on a finished run; `None` if they hold.
fn stopping_violation(model: &TrainedRecognizer, valid: &[GlyphRecording]) -> Option<String> {
    let h = &model.history;
    let patience = model.hyper.patience_epochs;
    let best = h.iter().map(|e| e.validation_accuracy).fold(f64::NEG_INFINITY, f64::max);
    let first_best = h.iter().position(|e| e.validation_accuracy == best)? + 1;
    if model.best_epoch != first_best {
        return Some(format!("best_epoch {} but first maximum at {first_best}", model.best_epoch));
    }
    if h.len() > model.best_epoch + patience {
        return Some(format!("{} epochs recorded past best {} + {patience}", h.len(), model.best_epoch));
    }
    if h.len() < model.hyper.max_epochs && h.len() != model.best_epoch + patience {
        return Some(format!("stopped at {} without exhausting patience", h.len()));
    }
    let restored = accuracy(model, valid);
    if restored != best {
        return Some(format!("restored parameters score {restored}, best epoch scored {best}"));
    }
    None
}

fn appendix_conformance(rnn_cv: &CvOutcome, corpus: &[GlyphRecording]) -> Verdict {
    let expected = TrainingHyper { max_epochs: EPOCHS, seed: 0, ..TrainingHyper::default() };
    let mut problems = Vec::new();
    for (i, model) in rnn_cv.models.iter().enumerate() {
        let doc = model.to_document();
        let hyper = TrainingHyper { seed: 0, ..doc.hyper };
        if hyper != expected
            || (hyper.batch_size, hyper.lr, hyper.clip, hyper.patience_epochs, hyper.init_range) != (20, 0.005, 10.0, 15, 0.08)
        {
            problems.push(format!("fold {i} hyper {:?}", doc.hyper));
        }
        let want = RnnConfig { input: 3, hidden: 100, layers: 2, head_hidden: 40, classes: 37, dropout_pct: 50 };
        if doc.rnn != Some(want) {
            problems.push(format!("fold {i} architecture {:?}", doc.rnn));
        }
        let data = fold_data(corpus, &rnn_cv.report.config, i).unwrap();
        if let Some(v) = stopping_violation(model, &data.validation) {
            problems.push(format!("fold {i}: {v}"));
        }
    }

    // a small run long enough for patience to end it
    let small = generate_corpus(&CorpusConfig::new(8, 0, 31)).unwrap();
    let (valid, tr): (Vec<GlyphRecording>, Vec<GlyphRecording>) = small.into_iter().partition(|r| r.child_id.ends_with('7') || r.child_id.ends_with('8'));
    let tr = augment_training_set(&tr, 1.0, 5).unwrap();
    let model = train(RecognizerKind::Rnn, &tr, &valid, TrainingHyper { seed: 2, ..TrainingHyper::default() }).unwrap();
    let stopped_early = model.history.len() < model.hyper.max_epochs;
    if let Some(v) = stopping_violation(&model, &valid) {
        problems.push(format!("small run: {v}"));
    }
    if !stopped_early {
        problems.push("small run never stopped early".into());
    }
    let detail = format!(
        "5 fold runs at batch 20, lr 0.005, clip 10, patience 15, init 0.08, 2x100 LSTM, head 40, dropout 0.5, 37 outputs; \
         small run stopped at epoch {} with best {}",
        model.history.len(),
        model.best_epoch
    );
    if problems.is_empty() {
        check(true, detail)
    } else {
        check(false, problems.join("; "))
    }
}

// ---- calibration ----

fn calibration_exactness() -> Verdict {
    let mut r = rng::stream(0xCA1);
    let mut failures = 0;
    let mut sizes = (usize::MAX, 0);
    for _ in 0..1000 {
        let n = 12 + rng::index(&mut r, 489);
        sizes = (sizes.0.min(n), sizes.1.max(n));
        let mut seen = BTreeSet::new();
        let mut values = Vec::with_capacity(n);
        while values.len() < n {
            let v: f64 = rand::Rng::random(&mut r);
            if seen.insert(v.to_bits()) {
                values.push(v);
            }
        }
        let cal = calibrate_threshold(&values, 0.086).unwrap();
        let below = values.iter().filter(|&&v| v < cal.threshold).count();
        let mut shuffled = values.clone();
        rng::shuffle(&mut r, &mut shuffled);
        let again = calibrate_threshold(&shuffled, 0.086).unwrap();
        if below != (0.086 * n as f64).round() as usize || again.threshold != cal.threshold {
            failures += 1;
        }
    }
    check(failures == 0, format!("1000 lists with N in [{}, {}], {failures} miscounts", sizes.0, sizes.1))
}

// ---- cross-validation structure ----

fn protocol_violations(report: &CvReport, corpus: &[GlyphRecording]) -> Vec<String> {
    let mut out = Vec::new();
    let td: BTreeSet<&str> = corpus.iter().filter(|r| r.group == Group::TypicallyDeveloping).map(|r| r.child_id.as_str()).collect();
    let dys: BTreeSet<&str> = corpus.iter().filter(|r| r.group == Group::Dysgraphic).map(|r| r.child_id.as_str()).collect();
    let mut validated: BTreeMap<&str, usize> = BTreeMap::new();
    for f in &report.folds {
        let training: BTreeSet<&str> = f.training_children.iter().map(String::as_str).collect();
        let validation: BTreeSet<&str> = f.validation_children.iter().map(String::as_str).collect();
        for c in &validation {
            *validated.entry(c).or_default() += 1;
        }
        if !training.is_disjoint(&validation) {
            out.push(format!("fold {} trains on a validation child", f.fold));
        }
        if training.iter().chain(&validation).any(|c| dys.contains(c)) {
            out.push(format!("fold {} trains or validates on a dysgraphic child", f.fold));
        }
        if training.union(&validation).copied().collect::<BTreeSet<_>>() != td {
            out.push(format!("fold {} does not cover every TD child", f.fold));
        }
        let scored: BTreeSet<&str> = f.validation.iter().map(|c| c.child_id.as_str()).collect();
        if scored != validation {
            out.push(format!("fold {} scores other children than it validates", f.fold));
        }
    }
    if report.folds.len() != 5 {
        out.push(format!("{} folds", report.folds.len()));
    }
    if validated.len() != td.len() || validated.values().any(|&n| n != 1) {
        out.push("some TD child is not validated exactly once".into());
    }
    out
}

fn cv_protocol(big: &[(&CvReport, &[GlyphRecording])]) -> Verdict {
    let mut r = rng::stream(0xF01D);
    let mut problems = Vec::new();
    let mut checked = 0;
    for (report, corpus) in big {
        problems.extend(protocol_violations(report, corpus));
        checked += 1;
    }
    for i in 0..6 {
        let td = 5 + rng::index(&mut r, 19);
        let dys = 1 + rng::index(&mut r, 3);
        let corpus = generate_corpus(&CorpusConfig::new(td, dys, 100 + i)).unwrap();
        let config = CvConfig { hyper: TrainingHyper { max_epochs: 0, ..TrainingHyper::default() }, ..CvConfig::new(RecognizerKind::Cnn, i) };
        let report = run_cross_validation(&corpus, &config).unwrap().report;
        problems.extend(protocol_violations(&report, &corpus).into_iter().map(|p| format!("{td}+{dys} corpus: {p}")));
        checked += 1;
    }
    if problems.is_empty() {
        check(true, format!("{checked} reports: every TD child validated once, no dysgraphic child trained on"))
    } else {
        check(false, problems.join("; "))
    }
}

// ---- detection ----

fn rnn_detection(report: &CvReport, took: Duration) -> Verdict {
    let rates: Vec<String> = report.folds.iter().map(|f| f.detection_rate.map_or("-".into(), |d| format!("{d:.2}"))).collect();
    let mean = report.summary.mean_detection_rate.unwrap_or(0.0);
    check(
        mean >= 0.8 && took <= BUDGET,
        format!("mean detection {mean:.3} (>= 0.80), per fold [{}], cross-validation took {:.0}s", rates.join(", "), took.as_secs_f64()),
    )
}

fn rnn_vs_cnn(rnn: &CvReport, cnn: &CvReport) -> Verdict {
    let (r, c) = (rnn.summary.mean_detection_rate.unwrap_or(0.0), cnn.summary.mean_detection_rate.unwrap_or(0.0));
    let gap_ok = c <= r - 0.15;
    let bank = TemplateBank::builtin();
    let mut pair_ok = true;
    let mut parts = Vec::new();
    for &(a, b) in bank.reversal_pairs() {
        let mut wins = 0;
        let mut cells = Vec::new();
        for (fr, fc) in rnn.folds.iter().zip(&cnn.folds) {
            let pr = pair_confusion(&fr.confusion, a, b).unwrap();
            let pc = pair_confusion(&fc.confusion, a, b).unwrap();
            if pr < pc {
                wins += 1;
            }
            cells.push(format!("{pr:.2}/{pc:.2}"));
        }
        pair_ok &= wins >= 3;
        parts.push(format!("{}{}: rnn<cnn in {wins}/5 seeds [{}]", a.as_char(), b.as_char(), cells.join(" ")));
    }
    check(gap_ok && pair_ok, format!("detection rnn {r:.3} vs cnn {c:.3} (gap >= 0.15); {}", parts.join("; ")))
}

// ---- subset ----

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn subset_diagnosis(report: &CvReport) -> Verdict {
    let mut rhos = Vec::new();
    for f in &report.folds {
        let children: Vec<_> = f.validation.iter().chain(&f.dysgraphic).collect();
        let full: Vec<f64> = children.iter().map(|c| c.d_full).collect();
        let sub: Vec<f64> = children.iter().map(|c| c.d_subset).collect();
        rhos.push(spearman(&full, &sub));
    }
    let rankings: Vec<_> = report.folds.iter().map(|f| f.ranking.clone()).collect();
    let mut used = BTreeSet::new();
    let mut rotation_ok = true;
    for (i, f) in report.folds.iter().enumerate() {
        let source = (0..5).filter(|&j| j != i && rankings[j].top(15) == f.subset).collect::<Vec<_>>();
        rotation_ok &= f.subset == subset_for_fold(&rankings, i, 15).unwrap() && f.subset == rankings[(i + 1) % 5].top(15);
        used.insert((i + 1) % 5);
        rotation_ok &= !source.is_empty();
    }
    rotation_ok &= used.len() == 5;
    let min = rhos.iter().copied().fold(f64::INFINITY, f64::min);
    check(
        min >= 0.8 && rotation_ok,
        format!(
            "Spearman(full 36, discriminative 15) per fold [{}] (min >= 0.8); rotation uses each ranking once: {rotation_ok}",
            rhos.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

// ---- star class ----

fn hybrid_invariant_failures(sources: &[&GlyphRecording], hybrid: &GlyphRecording) -> Option<String> {
    let n = sources.len();
    let lens: Vec<usize> = sources.iter().map(|s| s.samples.len().div_ceil(n)).collect();
    if hybrid.samples.len() != lens.iter().sum::<usize>() {
        return Some(format!("{} samples, expected {}", hybrid.samples.len(), lens.iter().sum::<usize>()));
    }
    if !hybrid.requested.is_star() {
        return Some("label is not '*'".into());
    }
    let ids: Vec<&str> = sources.iter().map(|s| s.child_id.as_str()).collect();
    if hybrid.child_id != format!("*:{}", ids.join("+")) {
        return Some(format!("provenance {}", hybrid.child_id));
    }
    let mut at = 0;
    for (i, len) in lens.iter().enumerate() {
        if i > 0 {
            let (p, q) = (&hybrid.samples[at - 1], &hybrid.samples[at]);
            if (p.x_mm - q.x_mm).hypot(p.y_mm - q.y_mm) > 1e-9 {
                return Some(format!("gap at join {i}"));
            }
        }
        // each piece keeps its source's shape
        let s = sources[i];
        let total = s.samples.len();
        let start = (i * len).min(total - len);
        for k in 1..*len {
            let (a, b) = (&s.samples[start + k - 1], &s.samples[start + k]);
            let (c, d) = (&hybrid.samples[at + k - 1], &hybrid.samples[at + k]);
            if ((b.x_mm - a.x_mm) - (d.x_mm - c.x_mm)).abs() > 1e-9 || ((b.y_mm - a.y_mm) - (d.y_mm - c.y_mm)).abs() > 1e-9 {
                return Some(format!("piece {i} distorted"));
            }
        }
        at += len;
    }
    None
}

fn star_suite(corpus: &[GlyphRecording], rnn_cv: &CvOutcome) -> Verdict {
    let data = fold_data(corpus, &rnn_cv.report.config, 0).unwrap();
    let real: Vec<&GlyphRecording> = data.train.iter().filter(|r| !r.requested.is_star()).collect();
    let training: BTreeSet<&str> = data.split.training_children.iter().map(String::as_str).collect();
    let eligible: Vec<&GlyphRecording> = real.iter().copied().filter(|r| r.samples.len() >= MIN_SOURCE_SAMPLES).collect();

    let mut r = rng::stream(0x57A2);
    let mut failures = Vec::new();
    for k in 0..10_000 {
        let n = 2 + rng::index(&mut r, 2);
        let sources: Vec<&GlyphRecording> = (0..n).map(|_| eligible[rng::index(&mut r, eligible.len())]).collect();
        let hybrid = make_star_hybrid(&sources).unwrap();
        if let Some(f) = hybrid_invariant_failures(&sources, &hybrid) {
            failures.push(format!("hybrid {k}: {f}"));
        }
    }
    // the training-set augmentation only ever draws from training children
    let base: Vec<GlyphRecording> = real.iter().map(|r| (*r).clone()).collect();
    let mut augmented = 0;
    let mut seed = 0;
    while augmented < 10_000 {
        let out = augment_training_set(&base, 1.0, seed).unwrap();
        let added = &out[base.len()..];
        if out[..base.len()] != base[..] || added.len() != star_count(base.len(), 1.0) {
            failures.push(format!("augmentation seed {seed} altered the real recordings or miscounted"));
        }
        for h in added {
            let ids = h.child_id.strip_prefix("*:").unwrap_or("");
            if !h.requested.is_star() || ids.split('+').any(|id| !training.contains(id)) {
                failures.push(format!("augmented hybrid {} is not a training-only star", h.child_id));
            }
        }
        augmented += added.len();
        seed += 1;
    }
    let invariants_ok = failures.is_empty();

    // held-out hybrids cut from the fold's validation recordings
    let model = &rnn_cv.models[0];
    let pool: Vec<&GlyphRecording> = data.validation.iter().filter(|r| r.samples.len() >= MIN_SOURCE_SAMPLES).collect();
    let mut held_out = Vec::new();
    while held_out.len() < 400 {
        let n = 2 + rng::index(&mut r, 2);
        let sources: Vec<&GlyphRecording> = (0..n).map(|_| pool[rng::index(&mut r, pool.len())]).collect();
        let h = make_star_hybrid(&sources).unwrap();
        if normalize(&h).is_ok() {
            held_out.push(h);
        }
    }
    let hits = held_out.iter().filter(|h| model.predict_proba(h).unwrap().argmax().is_star()).count();
    let share = hits as f64 / held_out.len() as f64;
    let detail = format!(
        "invariants on 10000 direct + {augmented} augmented hybrids: {}; rnn-fold0 gives '*' the argmax on {hits}/400 held-out hybrids ({:.1}%, need >= 70%)",
        if invariants_ok { "hold".to_string() } else { failures.iter().take(3).cloned().collect::<Vec<_>>().join("; ") },
        100.0 * share
    );
    check(invariants_ok && share >= 0.7, detail)
}

// ---- determinism ----

fn evaluate_determinism() -> Verdict {
    let corpus = generate_corpus(&CorpusConfig::new(12, 2, 5)).unwrap();
    let hyper = TrainingHyper { max_epochs: 2, ..TrainingHyper::default() };
    let configs = [
        CvConfig { hyper, ..CvConfig::new(RecognizerKind::Rnn, 3) },
        CvConfig { hyper, ..CvConfig::new(RecognizerKind::Cnn, 3) },
    ];
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    evaluate(&corpus, &configs, a.path()).unwrap();
    evaluate(&corpus, &configs, b.path()).unwrap();
    let files = ["rnn/quantiles.csv", "rnn/discriminative.csv", "cnn/quantiles.csv", "cnn/discriminative.csv", "confusion.csv"];
    let differing: Vec<&str> =
        files.iter().copied().filter(|f| std::fs::read(a.path().join(f)).unwrap() != std::fs::read(b.path().join(f)).unwrap()).collect();
    check(differing.is_empty(), format!("{} CSV files compared byte for byte, {} differ {differing:?}", files.len(), differing.len()))
}

fn main() {
    let mut results: Vec<(String, bool)> = Vec::new();
    let started = Instant::now();

    let (v, t) = timed(gradient_fidelity);
    report_line(&mut results, "gradient fidelity", v, t);
    let (v, t) = timed(calibration_exactness);
    report_line(&mut results, "calibration exactness", v, t);

    let corpus = generate_corpus(&CorpusConfig::new(200, 20, CORPUS_SEED)).unwrap();
    let config = |kind| CvConfig {
        hyper: TrainingHyper { max_epochs: EPOCHS, ..TrainingHyper::default() },
        threads: 0,
        ..CvConfig::new(kind, CV_SEED)
    };
    let (rnn_cv, rnn_took) = timed(|| run_cross_validation(&corpus, &config(RecognizerKind::Rnn)).unwrap());
    let (cnn_cv, cnn_took) = timed(|| run_cross_validation(&corpus, &config(RecognizerKind::Cnn)).unwrap());
    assert!(matches!(rnn_cv.models[0].network, Network::Rnn(_)));

    let (v, t) = timed(|| appendix_conformance(&rnn_cv, &corpus));
    report_line(&mut results, "appendix conformance", v, t);
    let (v, t) = timed(|| cv_protocol(&[(&rnn_cv.report, &corpus), (&cnn_cv.report, &corpus)]));
    report_line(&mut results, "cross-validation protocol", v, t);
    report_line(&mut results, "end-to-end rnn detection", rnn_detection(&rnn_cv.report, rnn_took), rnn_took);
    report_line(&mut results, "rnn vs cnn", rnn_vs_cnn(&rnn_cv.report, &cnn_cv.report), cnn_took);
    let (v, t) = timed(|| subset_diagnosis(&rnn_cv.report));
    report_line(&mut results, "subset diagnosis", v, t);
    let (v, t) = timed(|| star_suite(&corpus, &rnn_cv));
    report_line(&mut results, "star class", v, t);
    let (v, t) = timed(evaluate_determinism);
    report_line(&mut results, "determinism", v, t);

    let passed = results.iter().filter(|r| r.1).count();
    println!("{passed}/{} criteria passed in {:.0}s", results.len(), started.elapsed().as_secs_f64());
    if passed != results.len() {
        std::process::exit(1);
    }
}
