//! The two glyph recognizers and their training procedure: shuffled
//! mini-batches, per-component gradient clipping, Adam, and early stopping on
//! validation top-1 accuracy with the best epoch's parameters restored.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::glyph::{
    normalize_samples, rasterize, to_sequence_features, GlyphClass, GlyphError, GlyphRecording, DEFAULT_IMAGE_SIZE,
    DEFAULT_L_MAX, DEFAULT_STEP_MS,
};
use crate::nn::container::{decode_parameters, encode_parameters, TensorRecord};
use crate::nn::{
    clip_gradients, AdamConfig, AdamState, CnnConfig, CnnModel, ImageExample, NnError, ParameterSet, RnnConfig, RnnModel,
    SequenceExample, INIT_RANGE,
};
use crate::rng;

pub const MODEL_FORMAT: &str = "glyphscreen-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RecognizerError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("validation set is empty")]
    EmptyValidationSet,
    #[error("validation set contains the star class")]
    StarInValidation,
    #[error("invalid hyper-parameters: {0}")]
    InvalidHyper(String),
    #[error("{0} is not supported by a {1} recognizer")]
    Unsupported(&'static str, RecognizerKind),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Glyph(#[from] GlyphError),
    #[error("model file: {0}")]
    Format(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecognizerKind {
    Rnn,
    Cnn,
}

impl std::fmt::Display for RecognizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RecognizerKind::Rnn => "rnn",
            RecognizerKind::Cnn => "cnn",
        })
    }
}

impl std::str::FromStr for RecognizerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "rnn" => Ok(RecognizerKind::Rnn),
            "cnn" => Ok(RecognizerKind::Cnn),
            other => Err(format!("unknown recognizer kind '{other}' (expected rnn or cnn)")),
        }
    }
}

/// How a recording becomes a network input.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub step_ms: f64,
    pub l_max: usize,
    pub image_size: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig { step_ms: DEFAULT_STEP_MS, l_max: DEFAULT_L_MAX, image_size: DEFAULT_IMAGE_SIZE }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingHyper {
    pub batch_size: usize,
    pub lr: f64,
    pub clip: f64,
    pub patience_epochs: usize,
    pub init_range: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainingHyper {
    fn default() -> Self {
        TrainingHyper { batch_size: 20, lr: 0.005, clip: 10.0, patience_epochs: 15, init_range: INIT_RANGE, max_epochs: 200, seed: 0 }
    }
}

impl TrainingHyper {
    fn validate(&self) -> Result<(), RecognizerError> {
        let ok = self.batch_size > 0 && self.lr > 0.0 && self.clip > 0.0 && self.patience_epochs > 0 && self.init_range > 0.0;
        if ok {
            Ok(())
        } else {
            Err(RecognizerError::InvalidHyper(format!("{self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Network {
    Rnn(RnnModel),
    Cnn(CnnModel),
}

impl Network {
    fn params(&self) -> &ParameterSet {
        match self {
            Network::Rnn(m) => &m.params,
            Network::Cnn(m) => &m.params,
        }
    }

    fn params_mut(&mut self) -> &mut ParameterSet {
        match self {
            Network::Rnn(m) => &mut m.params,
            Network::Cnn(m) => &mut m.params,
        }
    }
}

/// A network input, or the marker for a trace that cannot be normalized.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelInput {
    Sequence(Vec<f64>),
    Image(Vec<f64>),
    Degenerate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub probs: Vec<f64>,
    /// The trace was unusable and `probs` is the uniform fallback.
    pub degenerate: bool,
}

impl Prediction {
    pub fn argmax(&self) -> GlyphClass {
        GlyphClass::from_index(argmax(&self.probs)).expect("37 outputs")
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Ranked classes after one timestep of the RNN.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimelineRow {
    pub timestep: usize,
    pub top: Vec<(GlyphClass, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedRecognizer {
    pub kind: RecognizerKind,
    pub network: Network,
    pub preprocess: PreprocessConfig,
    pub hyper: TrainingHyper,
    pub history: Vec<EpochRecord>,
    /// 0 when the model was never trained.
    pub best_epoch: usize,
    /// Fresh initializations discarded because training died (see [`train_with`]).
    pub restarts: usize,
}

pub fn prepare_input(kind: RecognizerKind, preprocess: &PreprocessConfig, rec: &GlyphRecording) -> ModelInput {
    let traj = match normalize_samples(&rec.samples, preprocess.step_ms) {
        Ok(t) => t,
        Err(_) => return ModelInput::Degenerate,
    };
    match kind {
        RecognizerKind::Rnn => ModelInput::Sequence(to_sequence_features(&traj, preprocess.l_max).flat()),
        RecognizerKind::Cnn => ModelInput::Image(rasterize(&traj, preprocess.image_size).pixels),
    }
}

fn uniform() -> Vec<f64> {
    vec![1.0 / GlyphClass::COUNT as f64; GlyphClass::COUNT]
}

impl TrainedRecognizer {
    /// Freshly initialized, untrained model.
    pub fn initialize(kind: RecognizerKind, hyper: TrainingHyper, preprocess: PreprocessConfig) -> Self {
        Self::initialize_attempt(kind, hyper, preprocess, 0)
    }

    fn initialize_attempt(kind: RecognizerKind, hyper: TrainingHyper, preprocess: PreprocessConfig, attempt: usize) -> Self {
        let mut seed = rng::derive(hyper.seed, 0x1417);
        if attempt > 0 {
            seed = rng::derive(seed, attempt as u64);
        }
        let network = match kind {
            RecognizerKind::Rnn => Network::Rnn(RnnModel::new(RnnConfig::default(), hyper.init_range, seed)),
            RecognizerKind::Cnn => {
                let config = CnnConfig { image: preprocess.image_size, ..CnnConfig::default() };
                Network::Cnn(CnnModel::new(config, hyper.init_range, seed))
            }
        };
        TrainedRecognizer { kind, network, preprocess, hyper, history: Vec::new(), best_epoch: 0, restarts: 0 }
    }

    pub fn prepare(&self, rec: &GlyphRecording) -> ModelInput {
        prepare_input(self.kind, &self.preprocess, rec)
    }

    pub fn predict_input(&self, input: &ModelInput) -> Result<Prediction, RecognizerError> {
        let probs = match (&self.network, input) {
            (_, ModelInput::Degenerate) => return Ok(Prediction { probs: uniform(), degenerate: true }),
            (Network::Rnn(m), ModelInput::Sequence(x)) => m.predict(x)?,
            (Network::Cnn(m), ModelInput::Image(x)) => m.predict(x)?,
            _ => return Err(RecognizerError::Nn(NnError::Shape("input does not match the network kind".into()))),
        };
        Ok(Prediction { probs, degenerate: false })
    }

    /// Eval-mode class probabilities; a degenerate trace yields the uniform
    /// vector, flagged.
    pub fn predict_proba(&self, rec: &GlyphRecording) -> Result<Prediction, RecognizerError> {
        self.predict_input(&self.prepare(rec))
    }

    /// Top-`k` classes after every timestep of the RNN.
    pub fn prefix_timeline(&self, rec: &GlyphRecording, k: usize) -> Result<Vec<TimelineRow>, RecognizerError> {
        let Network::Rnn(model) = &self.network else {
            return Err(RecognizerError::Unsupported("prefix timeline", self.kind));
        };
        let rows = match self.prepare(rec) {
            ModelInput::Sequence(x) => model.timeline(&x)?,
            _ => vec![uniform()],
        };
        Ok(rows
            .iter()
            .enumerate()
            .map(|(timestep, p)| TimelineRow { timestep, top: top_k(p, k) })
            .collect())
    }

    pub fn confusion_matrix(&self, eval_set: &[GlyphRecording]) -> Result<ConfusionMatrix, RecognizerError> {
        let mut cm = ConfusionMatrix::new();
        for rec in eval_set {
            cm.record(rec.requested, self.predict_proba(rec)?.argmax());
        }
        Ok(cm)
    }

    pub fn to_document(&self) -> ModelDocument {
        let (rnn, cnn) = match &self.network {
            Network::Rnn(m) => (Some(m.config), None),
            Network::Cnn(m) => (None, Some(m.config)),
        };
        ModelDocument {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            architecture: self.kind,
            rnn,
            cnn,
            preprocess: self.preprocess,
            hyper: self.hyper,
            history: self.history.clone(),
            best_epoch: self.best_epoch,
            restarts: self.restarts,
            tensors: encode_parameters(self.network.params()),
        }
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self, RecognizerError> {
        if doc.format != MODEL_FORMAT || doc.version != MODEL_VERSION {
            return Err(RecognizerError::Format(format!("unsupported container {} v{}", doc.format, doc.version)));
        }
        let params = decode_parameters(&doc.tensors)?;
        let network = match (doc.architecture, doc.rnn, doc.cnn) {
            (RecognizerKind::Rnn, Some(c), None) => Network::Rnn(RnnModel::from_params(c, params)?),
            (RecognizerKind::Cnn, None, Some(c)) => Network::Cnn(CnnModel::from_params(c, params)?),
            _ => return Err(RecognizerError::Format("architecture tag does not match its configuration".into())),
        };
        Ok(TrainedRecognizer {
            kind: doc.architecture,
            network,
            preprocess: doc.preprocess,
            hyper: doc.hyper,
            history: doc.history.clone(),
            best_epoch: doc.best_epoch,
            restarts: doc.restarts,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("model document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, RecognizerError> {
        let doc: ModelDocument = serde_json::from_str(text).map_err(|e| RecognizerError::Format(e.to_string()))?;
        Self::from_document(&doc)
    }
}

fn top_k(p: &[f64], k: usize) -> Vec<(GlyphClass, f64)> {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
    idx.into_iter().take(k).map(|i| (GlyphClass::from_index(i).expect("class index"), p[i])).collect()
}

/// Versioned JSON container: architecture tag and configuration, the
/// preprocessing that produced the inputs, training record, and named
/// tensors as base64 little-endian f64.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format: String,
    pub version: u32,
    pub architecture: RecognizerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rnn: Option<RnnConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cnn: Option<CnnConfig>,
    pub preprocess: PreprocessConfig,
    pub hyper: TrainingHyper,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    #[serde(default)]
    pub restarts: usize,
    pub tensors: Vec<TensorRecord>,
}

/// 37×37 counts, rows = true class, columns = predicted class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl Default for ConfusionMatrix {
    fn default() -> Self {
        Self::new()
    }
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        ConfusionMatrix { counts: vec![vec![0; GlyphClass::COUNT]; GlyphClass::COUNT] }
    }

    pub fn record(&mut self, truth: GlyphClass, predicted: GlyphClass) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn get(&self, truth: GlyphClass, predicted: GlyphClass) -> u64 {
        self.counts[truth.index()][predicted.index()]
    }

    pub fn row_total(&self, truth: GlyphClass) -> u64 {
        self.counts[truth.index()].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let diag: u64 = (0..GlyphClass::COUNT).map(|i| self.counts[i][i]).sum();
        diag as f64 / self.total().max(1) as f64
    }

    /// Element-wise sum, e.g. over folds.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

struct Prepared {
    input: ModelInput,
    label: usize,
}

fn prepare_all(model: &TrainedRecognizer, set: &[GlyphRecording]) -> Vec<Prepared> {
    set.iter().map(|r| Prepared { input: model.prepare(r), label: r.requested.index() }).collect()
}

fn accuracy(model: &TrainedRecognizer, valid: &[Prepared]) -> Result<f64, RecognizerError> {
    let mut correct = 0usize;
    for v in valid {
        if argmax(&model.predict_input(&v.input)?.probs) == v.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / valid.len() as f64)
}

fn batch_loss_and_grad(network: &Network, batch: &[&Prepared], seeds: &[u64]) -> Result<(f64, ParameterSet), RecognizerError> {
    Ok(match network {
        Network::Rnn(m) => {
            let ex: Vec<SequenceExample> = batch
                .iter()
                .zip(seeds)
                .map(|(p, &dropout_seed)| match &p.input {
                    ModelInput::Sequence(x) => SequenceExample { features: x, label: p.label, dropout_seed },
                    _ => unreachable!("degenerate and image inputs are filtered out"),
                })
                .collect();
            m.loss_and_grad(&ex)?
        }
        Network::Cnn(m) => {
            let ex: Vec<ImageExample> = batch
                .iter()
                .zip(seeds)
                .map(|(p, &dropout_seed)| match &p.input {
                    ModelInput::Image(x) => ImageExample { pixels: x, label: p.label, dropout_seed },
                    _ => unreachable!("degenerate and sequence inputs are filtered out"),
                })
                .collect();
            m.loss_and_grad(&ex)?
        }
    })
}

pub fn train(
    kind: RecognizerKind,
    train_set: &[GlyphRecording],
    valid_set: &[GlyphRecording],
    hyper: TrainingHyper,
) -> Result<TrainedRecognizer, RecognizerError> {
    train_with(kind, train_set, valid_set, hyper, PreprocessConfig::default(), |_| {})
}

/// [`train`] with explicit preprocessing and a per-epoch callback.
pub fn train_with(
    kind: RecognizerKind,
    train_set: &[GlyphRecording],
    valid_set: &[GlyphRecording],
    hyper: TrainingHyper,
    preprocess: PreprocessConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainedRecognizer, RecognizerError> {
    hyper.validate()?;
    if train_set.is_empty() {
        return Err(RecognizerError::EmptyTrainingSet);
    }
    if valid_set.is_empty() {
        return Err(RecognizerError::EmptyValidationSet);
    }
    if valid_set.iter().any(|r| r.requested.is_star()) {
        return Err(RecognizerError::StarInValidation);
    }
    let mut model = TrainedRecognizer::initialize(kind, hyper, preprocess);
    if hyper.max_epochs == 0 {
        return Ok(model);
    }
    // unusable traces carry no training signal
    let train: Vec<Prepared> = prepare_all(&model, train_set).into_iter().filter(|p| p.input != ModelInput::Degenerate).collect();
    if train.is_empty() {
        return Err(RecognizerError::EmptyTrainingSet);
    }
    let valid = prepare_all(&model, valid_set);
    for attempt in 0..=MAX_RESTARTS {
        if attempt > 0 {
            model = TrainedRecognizer::initialize_attempt(kind, hyper, preprocess, attempt);
            model.restarts = attempt;
        }
        if run_epochs(&mut model, &train, &valid, attempt < MAX_RESTARTS, &mut on_epoch)? {
            break;
        }
    }
    Ok(model)
}

/// Restarts allowed when a run dies before it learns anything.
pub const MAX_RESTARTS: usize = 3;

/// True when no parameter other than the output bias received any gradient,
/// i.e. every hidden ReLU is off for the whole batch.
fn is_dead(grads: &ParameterSet) -> bool {
    let n = grads.tensors().len();
    grads.tensors()[..n - 1].iter().all(|t| t.data().iter().all(|&v| v == 0.0))
}

/// One training attempt. With `may_abort`, returns false as soon as the last
/// quarter of an epoch was dead: from there only the
/// output bias can move, so the run is stuck at the class prior for good.
fn run_epochs(
    model: &mut TrainedRecognizer,
    train: &[Prepared],
    valid: &[Prepared],
    may_abort: bool,
    on_epoch: &mut impl FnMut(&EpochRecord),
) -> Result<bool, RecognizerError> {
    let hyper = model.hyper;
    let mut adam = AdamState::new(model.network.params(), AdamConfig { lr: hyper.lr, ..AdamConfig::default() });
    let mut best: Option<(usize, f64, ParameterSet)> = None;
    let batches = train.len().div_ceil(hyper.batch_size);
    for epoch in 1..=hyper.max_epochs {
        let epoch_seed = rng::derive(hyper.seed, epoch as u64);
        let mut order: Vec<usize> = (0..train.len()).collect();
        rng::shuffle(&mut rng::stream(epoch_seed), &mut order);
        let mut loss_sum = 0.0;
        let mut alive = false;
        for (b, chunk) in order.chunks(hyper.batch_size).enumerate() {
            let batch: Vec<&Prepared> = chunk.iter().map(|&i| &train[i]).collect();
            let seeds: Vec<u64> = (0..chunk.len()).map(|j| rng::derive(epoch_seed, (b * hyper.batch_size + j) as u64 + 1)).collect();
            let (loss, mut grads) = batch_loss_and_grad(&model.network, &batch, &seeds)?;
            loss_sum += loss * chunk.len() as f64;
            if 4 * b >= 3 * batches && !alive {
                alive = !is_dead(&grads);
            }
            clip_gradients(&mut grads, hyper.clip);
            adam.step(model.network.params_mut(), &grads);
        }
        let record = EpochRecord { epoch, train_loss: loss_sum / train.len() as f64, validation_accuracy: accuracy(model, valid)? };
        model.history.push(record);
        on_epoch(&record);
        if may_abort && !alive && batches >= 4 {
            return Ok(false);
        }
        if best.as_ref().is_none_or(|(_, acc, _)| record.validation_accuracy > *acc) {
            best = Some((epoch, record.validation_accuracy, model.network.params().clone()));
        }
        let best_epoch = best.as_ref().map_or(0, |b| b.0);
        if epoch - best_epoch >= hyper.patience_epochs {
            break;
        }
    }
    let (best_epoch, _, params) = best.expect("at least one epoch ran");
    *model.network.params_mut() = params;
    model.best_epoch = best_epoch;
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glyph::{Group, RecordingMeta, SamplePoint};

    fn rec(glyph: char, points: &[(f64, f64)]) -> GlyphRecording {
        GlyphRecording {
            child_id: "c".into(),
            group: Group::TypicallyDeveloping,
            requested: GlyphClass::from_char(glyph).unwrap(),
            samples: points.iter().enumerate().map(|(i, &(x, y))| SamplePoint::new(i as f64 * 20.0, x, y, true)).collect(),
            meta: RecordingMeta::default(),
        }
    }

    fn small_hyper(max_epochs: usize) -> TrainingHyper {
        TrainingHyper { max_epochs, seed: 5, ..TrainingHyper::default() }
    }

    #[test]
    fn zero_epochs_returns_the_initialized_model() {
        let set = vec![rec('a', &[(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)])];
        let m = train(RecognizerKind::Rnn, &set, &set, small_hyper(0)).unwrap();
        assert!(m.history.is_empty());
        assert_eq!(m.best_epoch, 0);
        assert_eq!(m, TrainedRecognizer::initialize(RecognizerKind::Rnn, small_hyper(0), PreprocessConfig::default()));
    }

    #[test]
    fn empty_sets_are_rejected() {
        let set = vec![rec('a', &[(0.0, 0.0), (1.0, 1.0)])];
        assert!(matches!(train(RecognizerKind::Cnn, &[], &set, small_hyper(1)), Err(RecognizerError::EmptyTrainingSet)));
        assert!(matches!(train(RecognizerKind::Cnn, &set, &[], small_hyper(1)), Err(RecognizerError::EmptyValidationSet)));
    }

    #[test]
    fn degenerate_trace_scores_uniform_and_is_flagged() {
        let m = TrainedRecognizer::initialize(RecognizerKind::Rnn, small_hyper(0), PreprocessConfig::default());
        let p = m.predict_proba(&rec('q', &[(1.0, 1.0), (1.0, 1.0), (1.0, 1.0)])).unwrap();
        assert!(p.degenerate);
        assert!(p.probs.iter().all(|v| *v == 1.0 / 37.0));
    }

    #[test]
    fn timeline_is_rnn_only_and_ends_in_predict_proba() {
        let r = rec('z', &[(0.0, 0.0), (1.0, 0.5), (2.0, 0.0), (3.0, 1.0), (2.0, 2.0)]);
        let rnn = TrainedRecognizer::initialize(RecognizerKind::Rnn, small_hyper(0), PreprocessConfig::default());
        let tl = rnn.prefix_timeline(&r, 37).unwrap();
        let p = rnn.predict_proba(&r).unwrap().probs;
        let last: Vec<f64> = {
            let mut v = vec![0.0; 37];
            for (g, q) in &tl.last().unwrap().top {
                v[g.index()] = *q;
            }
            v
        };
        assert_eq!(last, p);
        let cnn = TrainedRecognizer::initialize(RecognizerKind::Cnn, small_hyper(0), PreprocessConfig::default());
        assert!(matches!(cnn.prefix_timeline(&r, 3), Err(RecognizerError::Unsupported(..))));
    }

    #[test]
    fn container_round_trip_preserves_predictions() {
        let r = rec('e', &[(0.0, 0.0), (1.0, 0.5), (2.0, 0.0), (3.0, 1.0)]);
        for kind in [RecognizerKind::Rnn, RecognizerKind::Cnn] {
            let m = TrainedRecognizer::initialize(kind, small_hyper(0), PreprocessConfig::default());
            let back = TrainedRecognizer::from_json(&m.to_json()).unwrap();
            assert_eq!(back, m);
            assert_eq!(back.predict_proba(&r).unwrap(), m.predict_proba(&r).unwrap());
        }
        assert!(TrainedRecognizer::from_json("{\"format\":\"x\"}").is_err());
    }

    #[test]
    fn confusion_counts_argmax_per_true_class() {
        let mut cm = ConfusionMatrix::new();
        let a = GlyphClass::from_char('a').unwrap();
        let b = GlyphClass::from_char('b').unwrap();
        cm.record(a, a);
        cm.record(a, b);
        cm.record(b, b);
        assert_eq!(cm.row_total(a), 2);
        assert_eq!(cm.get(a, b), 1);
        assert!((cm.accuracy() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn top_k_breaks_ties_by_index() {
        let mut p = vec![0.0; 37];
        p[5] = 0.4;
        p[3] = 0.4;
        p[9] = 0.2;
        let t = top_k(&p, 3);
        assert_eq!(t.iter().map(|(g, _)| g.index()).collect::<Vec<_>>(), vec![3, 5, 9]);
    }

    #[test]
    fn dead_head_is_detected_and_restarts_reseed() {
        let hyper = small_hyper(1);
        let mut m = TrainedRecognizer::initialize(RecognizerKind::Rnn, hyper, PreprocessConfig::default());
        let r = rec('z', &[(0.0, 0.0), (1.0, 0.5), (2.0, 0.0), (3.0, 1.0)]);
        let prepared = prepare_all(&m, &[r.clone(), r]);
        let batch: Vec<&Prepared> = prepared.iter().collect();
        let (_, grads) = batch_loss_and_grad(&m.network, &batch, &[1, 2]).unwrap();
        assert!(!is_dead(&grads));
        // every head ReLU off: only the output bias still learns
        let Network::Rnn(net) = &mut m.network else { unreachable!() };
        let b1 = net.params.names().iter().position(|n| n == "head.b1").unwrap();
        net.params[b1].fill(-100.0);
        let (_, grads) = batch_loss_and_grad(&m.network, &batch, &[1, 2]).unwrap();
        assert!(is_dead(&grads));

        let again = TrainedRecognizer::initialize_attempt(RecognizerKind::Rnn, hyper, PreprocessConfig::default(), 0);
        let other = TrainedRecognizer::initialize_attempt(RecognizerKind::Rnn, hyper, PreprocessConfig::default(), 1);
        assert_eq!(again, TrainedRecognizer::initialize(RecognizerKind::Rnn, hyper, PreprocessConfig::default()));
        assert_ne!(other.network, again.network);
    }
}
