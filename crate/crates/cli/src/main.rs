use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use glyphscreen_core::diagnosis::{
    diagnose, full_glyph_set, glyph_level_means, rank_discriminative, score_session, Calibration, ChildSession, SubsetMode,
    DYSGRAPHIA_RATE,
};
use glyphscreen_core::glyph::{read_recordings, write_recordings, GlyphRecording, Group};
use glyphscreen_core::harness::{evaluate, fold_data, CvConfig, ModelBundle, BUNDLE_FORMAT};
use glyphscreen_core::recognizer::{train_with, RecognizerKind, TrainedRecognizer, TrainingHyper};
use glyphscreen_core::synth::{corpus_manifest, generate_corpus, CorpusConfig};

#[derive(Parser)]
#[command(name = "glyphscreen", version, about = "Handwriting screening from tablet glyph recordings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus and its manifest.
    Generate(GenerateArgs),
    /// Train one recognizer on one cross-validation fold.
    Train(TrainArgs),
    /// Run 5-fold cross-validation and write the report and CSV artifacts.
    Evaluate(EvaluateArgs),
    /// Score one child's recordings and print the diagnosis as JSON.
    Diagnose(DiagnoseArgs),
    /// Print the discriminative glyph ranking as CSV.
    RankGlyphs(RankArgs),
    /// Per-timestep RNN predictions for one recording, as CSV.
    Timeline(TimelineArgs),
    /// Serve dictation sessions over HTTP.
    Serve(ServeArgs),
    /// Write a stored session's recordings in the corpus format.
    ExportSession(ExportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 200)]
    td: usize,
    #[arg(long, default_value_t = 20)]
    dysgraphic: usize,
    #[arg(long, default_value_t = 1)]
    repetitions: usize,
    #[arg(long, default_value_t = 200.0)]
    sampling_hz: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Defaults to `<out>.manifest.json`.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Clone, Copy)]
struct HyperArgs {
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    init_range: Option<f64>,
}

impl HyperArgs {
    fn apply(&self, mut h: TrainingHyper) -> TrainingHyper {
        h.max_epochs = self.max_epochs.unwrap_or(h.max_epochs);
        h.batch_size = self.batch_size.unwrap_or(h.batch_size);
        h.lr = self.lr.unwrap_or(h.lr);
        h.clip = self.clip.unwrap_or(h.clip);
        h.patience_epochs = self.patience.unwrap_or(h.patience_epochs);
        h.init_range = self.init_range.unwrap_or(h.init_range);
        h
    }
}

#[derive(Args)]
struct CvArgs {
    /// Corpus in the `.glyphs.jsonl` format.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 1.0)]
    star_fraction: f64,
    #[command(flatten)]
    hyper: HyperArgs,
}

impl CvArgs {
    fn config(&self, kind: RecognizerKind) -> CvConfig {
        let base = CvConfig::new(kind, self.seed);
        CvConfig { hyper: self.hyper.apply(base.hyper), folds: self.folds, star_fraction: self.star_fraction, ..base }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    kind: RecognizerKind,
    #[arg(long, default_value_t = 0)]
    fold: usize,
    #[command(flatten)]
    cv: CvArgs,
    /// Receives `model.json` and `history.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindChoice {
    Rnn,
    Cnn,
    Both,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long, value_enum, default_value = "both")]
    kind: KindChoice,
    #[command(flatten)]
    cv: CvArgs,
    /// Folds trained in parallel; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeChoice {
    Full36,
    Discriminative15,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Model bundle, or a bare model together with `--threshold`.
    #[arg(long)]
    model: PathBuf,
    /// Recordings in the `.glyphs.jsonl` format.
    #[arg(long)]
    session: PathBuf,
    /// Required when the file holds more than one child.
    #[arg(long)]
    child: Option<String>,
    #[arg(long, value_enum, default_value = "full36")]
    mode: ModeChoice,
    /// Overrides the bundled calibration.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RankArgs {
    #[arg(long)]
    model: PathBuf,
    /// Rank from this corpus instead of the ranking stored in the bundle.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TimelineArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    recordings: PathBuf,
    /// Position of the recording in the file.
    #[arg(long, default_value_t = 0)]
    index: usize,
    #[arg(long, default_value_t = 3)]
    top: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    model_dir: PathBuf,
    /// Session log and snapshot.
    #[arg(long, default_value = "sessions")]
    data_dir: PathBuf,
    #[arg(long, default_value_t = 8080)]
    port: u16,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long, default_value = "sessions")]
    data_dir: PathBuf,
    #[arg(long)]
    session: String,
    #[arg(long)]
    out: PathBuf,
}

fn read_corpus(path: &Path) -> Result<Vec<GlyphRecording>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_recordings(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

/// A bundle written by `evaluate`, or a bare model written by `train`.
fn load_model(path: &Path) -> Result<(TrainedRecognizer, Option<ModelBundle>)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if value.get("format").and_then(|f| f.as_str()) == Some(BUNDLE_FORMAT) {
        let bundle: ModelBundle = serde_json::from_value(value)?;
        let model = TrainedRecognizer::from_document(&bundle.model)?;
        Ok((model, Some(bundle)))
    } else {
        Ok((TrainedRecognizer::from_json(&text)?, None))
    }
}

fn generate(args: GenerateArgs) -> Result<()> {
    let config = CorpusConfig {
        repetitions_per_glyph: args.repetitions,
        sampling_hz: args.sampling_hz,
        ..CorpusConfig::new(args.td, args.dysgraphic, args.seed)
    };
    let recs = generate_corpus(&config)?;
    let mut bytes = Vec::new();
    write_recordings(&mut bytes, &recs)?;
    std::fs::write(&args.out, &bytes).with_context(|| format!("writing {}", args.out.display()))?;
    let manifest = corpus_manifest(&config, recs.len(), &bytes);
    let path = args.manifest.unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".manifest.json");
        p.into()
    });
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    eprintln!("{} recordings from {} writers, sha256 {}", manifest.recordings, manifest.writers, manifest.sha256);
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let corpus = read_corpus(&args.cv.corpus)?;
    let config = args.cv.config(args.kind);
    let data = fold_data(&corpus, &config, args.fold)?;
    eprintln!(
        "fold {}: {} training recordings ({} star), {} validation",
        args.fold,
        data.train.len(),
        data.star_hybrids,
        data.validation.len()
    );
    let model = train_with(args.kind, &data.train, &data.validation, data.hyper, config.preprocess, |e| {
        eprintln!("epoch {:>3}  loss {:.4}  valid acc {:.4}", e.epoch, e.train_loss, e.validation_accuracy);
    })?;
    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("model.json"), model.to_json())?;
    let mut w = csv::Writer::from_path(args.out.join("history.csv"))?;
    w.write_record(["epoch", "train_loss", "validation_accuracy"])?;
    for e in &model.history {
        w.write_record([e.epoch.to_string(), e.train_loss.to_string(), e.validation_accuracy.to_string()])?;
    }
    w.flush()?;
    eprintln!("best epoch {} ({} restarts)", model.best_epoch, model.restarts);
    Ok(())
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    let corpus = read_corpus(&args.cv.corpus)?;
    let kinds = match args.kind {
        KindChoice::Rnn => vec![RecognizerKind::Rnn],
        KindChoice::Cnn => vec![RecognizerKind::Cnn],
        KindChoice::Both => vec![RecognizerKind::Rnn, RecognizerKind::Cnn],
    };
    let configs: Vec<CvConfig> = kinds.iter().map(|k| CvConfig { threads: args.threads, ..args.cv.config(*k) }).collect();
    for report in evaluate(&corpus, &configs, &args.out)? {
        let s = &report.summary;
        let rate = |m: Option<f64>, sd: Option<f64>| match (m, sd) {
            (Some(m), Some(sd)) => format!("{m:.3} ± {sd:.3}"),
            _ => "n/a".to_string(),
        };
        println!(
            "{}: detection {}, subset detection {}, validation accuracy {:.3}",
            report.config.kind,
            rate(s.mean_detection_rate, s.std_detection_rate),
            rate(s.mean_subset_detection_rate, s.std_subset_detection_rate),
            s.validation_accuracy
        );
    }
    Ok(())
}

fn run_diagnose(args: DiagnoseArgs) -> Result<()> {
    let (model, bundle) = load_model(&args.model)?;
    let recs = read_corpus(&args.session)?;
    let mut sessions = ChildSession::from_recordings(&recs);
    let session = match (&args.child, sessions.len()) {
        (Some(id), _) => sessions.into_iter().find(|s| &s.child_id == id).ok_or_else(|| anyhow!("no recordings for child '{id}'"))?,
        (None, 1) => sessions.remove(0),
        (None, 0) => bail!("{} holds no recordings", args.session.display()),
        (None, n) => bail!("{} holds {n} children; pick one with --child", args.session.display()),
    };
    let (mode, subset, cal) = match args.mode {
        ModeChoice::Full36 => (SubsetMode::Full36, full_glyph_set(), bundle.as_ref().and_then(|b| b.calibration.clone())),
        ModeChoice::Discriminative15 => {
            let b = bundle.as_ref().ok_or_else(|| anyhow!("discriminative15 needs a model bundle"))?;
            if b.subset.is_empty() {
                bail!("the bundle has no discriminative subset");
            }
            (SubsetMode::Discriminative15, b.subset.clone(), b.subset_calibration.clone())
        }
    };
    let cal = match args.threshold {
        Some(threshold) => Calibration { threshold, rate: DYSGRAPHIA_RATE, fold: None, validation_d: Vec::new() },
        None => cal.ok_or_else(|| anyhow!("the model carries no calibration for this mode; pass --threshold"))?,
    };
    let scored = score_session(&model, &session, Some(&subset))?;
    let report = diagnose(&scored, &subset, mode, &cal)?;
    let mut out = output(args.out.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;
    Ok(())
}

fn rank_glyphs(args: RankArgs) -> Result<()> {
    let (model, bundle) = load_model(&args.model)?;
    let ranking = match (&args.corpus, bundle) {
        (Some(path), _) => {
            let recs = read_corpus(path)?;
            let scored = ChildSession::from_recordings(&recs)
                .iter()
                .map(|s| score_session(&model, s, None))
                .collect::<Result<Vec<_>, _>>()?;
            let td = glyph_level_means(&scored, Group::TypicallyDeveloping)?;
            let dys = glyph_level_means(&scored, Group::Dysgraphic)?;
            rank_discriminative(&td, &dys)?
        }
        (None, Some(b)) => b.ranking,
        (None, None) => bail!("a bare model has no stored ranking; pass --corpus"),
    };
    ranking.write_csv(output(args.out.as_deref())?)?;
    Ok(())
}

fn timeline(args: TimelineArgs) -> Result<()> {
    let (model, _) = load_model(&args.model)?;
    let recs = read_corpus(&args.recordings)?;
    let rec = recs.get(args.index).ok_or_else(|| anyhow!("{} holds {} recordings", args.recordings.display(), recs.len()))?;
    let rows = model.prefix_timeline(rec, args.top)?;
    let mut w = csv::Writer::from_writer(output(args.out.as_deref())?);
    w.write_record(["timestep", "rank", "glyph", "probability"])?;
    for row in rows {
        for (rank, (glyph, p)) in row.top.iter().enumerate() {
            w.write_record([row.timestep.to_string(), (rank + 1).to_string(), glyph.as_char().to_string(), p.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    let state = glyphscreen_service::open_state(&args.model_dir, &args.data_dir).map_err(|e| anyhow!(e))?;
    eprintln!("{} models, {} stored sessions, listening on port {}", state.models.summaries().len(), state.store.session_count(), args.port);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(glyphscreen_service::serve(state, args.port))?;
    Ok(())
}

fn export_session(args: ExportArgs) -> Result<()> {
    let sessions = glyphscreen_service::store::load_sessions(&args.data_dir)?;
    let record = sessions.get(&args.session).ok_or_else(|| anyhow!("no session '{}' in {}", args.session, args.data_dir.display()))?;
    let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_recordings(BufWriter::new(file), &record.export())?;
    eprintln!("{} of {} glyphs exported", record.recordings.len(), record.state.order.len());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Diagnose(a) => run_diagnose(a),
        Command::RankGlyphs(a) => rank_glyphs(a),
        Command::Timeline(a) => timeline(a),
        Command::Serve(a) => serve(a),
        Command::ExportSession(a) => export_session(a),
    }
}
