use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use glyphscreen_core::diagnosis::{d_statistic_subset, diagnose, full_glyph_set, ChildSession, DiagnosisReport, SubsetMode};
use glyphscreen_core::glyph::{validate_samples, GlyphClass, Group, RecordingMeta, SamplePoint};
use glyphscreen_core::rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::models::{ModelRegistry, ModelSummary};
use crate::store::{apply_scored, Event, SessionRecord, SessionState, SessionStatus, SessionStore, StoredRecording, TopClass};

pub struct AppState {
    pub models: ModelRegistry,
    pub store: SessionStore,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/glyphs", post(submit_glyph))
        .route("/sessions/{id}/report", get(session_report))
        .route("/models", get(list_models))
        .route("/models/{id}/discriminative", get(model_ranking))
        .with_state(state)
}

/// Error body: `{"error": reason_code, "message": text, ...details}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub details: serde_json::Map<String, serde_json::Value>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into(), details: serde_json::Map::new() }
    }

    fn with(mut self, key: &str, value: serde_json::Value) -> Self {
        self.details.insert(key.into(), value);
        self
    }

    fn not_found(code: &'static str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, format!("no such id '{id}'"))
    }

    fn invalid(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }

    fn conflict(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, code, message)
    }

    fn internal(message: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = self.details;
        body.insert("error".into(), json!(self.code));
        body.insert("message".into(), json!(self.message));
        (self.status, Json(serde_json::Value::Object(body))).into_response()
    }
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::invalid("invalid_body", e.to_string()))
}

fn glyphs_json(glyphs: &[GlyphClass]) -> serde_json::Value {
    json!(glyphs.iter().map(|g| g.as_char().to_string()).collect::<Vec<_>>())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    model_id: String,
    mode: SubsetMode,
    seed: u64,
}

/// Dictation order: the mode's glyphs shuffled by `seed`.
pub fn dictation_order(glyphs: &[GlyphClass], seed: u64) -> Vec<GlyphClass> {
    let mut order = glyphs.to_vec();
    rng::shuffle(&mut rng::stream(seed), &mut order);
    order
}

async fn create_session(State(app): State<Arc<AppState>>, body: Bytes) -> Result<(StatusCode, Json<SessionState>), ApiError> {
    let req: CreateSession = parse_body(&body)?;
    let model = app.models.get(&req.model_id).ok_or_else(|| ApiError::not_found("model_not_found", &req.model_id))?;
    let glyphs = match req.mode {
        SubsetMode::Full36 => full_glyph_set(),
        SubsetMode::Discriminative15 if model.bundle.subset.is_empty() => {
            return Err(ApiError::invalid("subset_unavailable", "the model has no discriminative subset"))
        }
        SubsetMode::Discriminative15 => model.bundle.subset.clone(),
    };
    let seq = app.store.next_seq();
    let created_at = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64);
    let state = SessionState {
        session_id: format!("s{seq:06}"),
        created_at,
        model_id: req.model_id,
        mode: req.mode,
        seed: req.seed,
        order: dictation_order(&glyphs, req.seed),
        completed: BTreeMap::new(),
        status: SessionStatus::Open,
    };
    let record = SessionRecord { state: state.clone(), recordings: BTreeMap::new(), last_seq: seq };
    app.store.append(&Event::Created { seq, session: record.clone() }).map_err(ApiError::internal)?;
    app.store.insert(record);
    app.store.maybe_snapshot(seq).await.map_err(ApiError::internal)?;
    Ok((StatusCode::CREATED, Json(state)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SubmitGlyph {
    glyph: String,
    samples: Vec<(f64, f64, f64, u8, Option<f64>)>,
    #[serde(default)]
    sampling_hz: Option<f64>,
    #[serde(default)]
    resolution_mm: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub session_id: String,
    pub glyph: GlyphClass,
    pub top5: Vec<TopClass>,
    pub requested_score: f64,
    pub running_d: f64,
    pub remaining: Vec<GlyphClass>,
    pub degenerate: bool,
    pub status: SessionStatus,
}

fn parse_glyph(text: &str) -> Result<GlyphClass, ApiError> {
    let mut chars = text.chars();
    let g = match (chars.next(), chars.next()) {
        (Some(c), None) => GlyphClass::from_char(c),
        _ => None,
    };
    match g {
        Some(g) if g.is_star() => Err(ApiError::invalid("star_requested", "the star class is never dictated")),
        Some(g) => Ok(g),
        None => Err(ApiError::invalid("invalid_glyph", format!("'{text}' is not a glyph"))),
    }
}

/// Mean score over the glyphs scored so far, through the same summation as
/// the offline D statistic.
fn running_d(state: &SessionState) -> f64 {
    let mut s = ChildSession::new(&state.session_id, Group::TypicallyDeveloping);
    s.scores = state.completed.iter().map(|(g, c)| (*g, c.score)).collect();
    let scored: Vec<GlyphClass> = state.completed.keys().copied().collect();
    d_statistic_subset(&s, &scored).expect("at least one glyph is scored")
}

async fn submit_glyph(State(app): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> Result<Json<SubmitResponse>, ApiError> {
    let handle = app.store.get(&id).ok_or_else(|| ApiError::not_found("session_not_found", &id))?;
    let req: SubmitGlyph = parse_body(&body)?;
    let glyph = parse_glyph(&req.glyph)?;

    let mut points = Vec::with_capacity(req.samples.len());
    for (i, &(t, x, y, pen, pressure)) in req.samples.iter().enumerate() {
        if pen > 1 {
            return Err(ApiError::invalid("invalid_pen", format!("sample {i}: pen must be 0 or 1")).with("sample", json!(i)));
        }
        points.push(SamplePoint { t_ms: t, x_mm: x, y_mm: y, pen_down: pen == 1, pressure });
    }
    validate_samples(&points).map_err(|issue| ApiError::invalid(issue.code(), issue.to_string()))?;
    let defaults = RecordingMeta::default();
    let meta = RecordingMeta {
        sampling_hz: req.sampling_hz.unwrap_or(defaults.sampling_hz),
        resolution_mm: req.resolution_mm.unwrap_or(defaults.resolution_mm),
    };
    if !(meta.sampling_hz.is_finite() && meta.sampling_hz > 0.0 && meta.resolution_mm.is_finite() && meta.resolution_mm > 0.0) {
        return Err(ApiError::invalid("invalid_metadata", "sampling_hz and resolution_mm must be positive"));
    }
    let stored = StoredRecording::from_points(&points, meta);

    // one submission per session at a time; other sessions are unaffected
    let mut record = handle.lock().await;
    if record.state.status == SessionStatus::Complete {
        return Err(ApiError::conflict("session_closed", "every dictated glyph is already scored"));
    }
    if !record.state.order.contains(&glyph) {
        return Err(ApiError::invalid("glyph_not_dictated", format!("'{}' is not part of this session", glyph.as_char())));
    }
    if record.state.completed.contains_key(&glyph) {
        return Err(ApiError::conflict("glyph_already_scored", format!("'{}' was already scored", glyph.as_char())));
    }
    let model = app.models.get(&record.state.model_id).ok_or_else(|| ApiError::not_found("model_not_found", &record.state.model_id))?;
    let recording = stored.to_recording(&record.state.session_id, glyph);
    let prediction = tokio::task::spawn_blocking(move || model.recognizer.predict_proba(&recording))
        .await
        .map_err(ApiError::internal)?
        .map_err(ApiError::internal)?;
    let mut ranked: Vec<usize> = (0..prediction.probs.len()).collect();
    ranked.sort_by(|&a, &b| prediction.probs[b].total_cmp(&prediction.probs[a]).then(a.cmp(&b)));
    let scored = crate::store::ScoredGlyph {
        score: prediction.probs[glyph.index()],
        degenerate: prediction.degenerate,
        top5: ranked
            .into_iter()
            .take(5)
            .map(|i| TopClass { glyph: GlyphClass::from_index(i).expect("class index"), probability: prediction.probs[i] })
            .collect(),
    };

    let seq = app.store.next_seq();
    let event = Event::Scored { seq, session_id: id.clone(), glyph, scored: scored.clone(), recording: stored.clone() };
    app.store.append(&event).map_err(ApiError::internal)?;
    apply_scored(&mut record, seq, glyph, scored.clone(), stored);
    let response = SubmitResponse {
        session_id: id,
        glyph,
        top5: scored.top5,
        requested_score: scored.score,
        running_d: running_d(&record.state),
        remaining: record.state.remaining(),
        degenerate: scored.degenerate,
        status: record.state.status,
    };
    drop(record);
    app.store.maybe_snapshot(seq).await.map_err(ApiError::internal)?;
    Ok(Json(response))
}

/// Report for a complete session, using the calibration bundled with the
/// session's model for its mode.
pub fn report_for(models: &ModelRegistry, record: &SessionRecord) -> Result<DiagnosisReport, ApiError> {
    let state = &record.state;
    let remaining = state.remaining();
    if !remaining.is_empty() {
        return Err(ApiError::conflict("session_incomplete", format!("{} glyphs are not scored yet", remaining.len()))
            .with("missing", glyphs_json(&remaining)));
    }
    let model = models.get(&state.model_id).ok_or_else(|| ApiError::not_found("model_not_found", &state.model_id))?;
    let cal = match state.mode {
        SubsetMode::Full36 => model.bundle.calibration.as_ref(),
        SubsetMode::Discriminative15 => model.bundle.subset_calibration.as_ref(),
    }
    .ok_or_else(|| ApiError::conflict("model_uncalibrated", "the model has no calibration for this mode"))?;
    let mut session = ChildSession::new(&state.session_id, Group::TypicallyDeveloping);
    for (g, c) in &state.completed {
        session.scores.insert(*g, c.score);
        if c.degenerate {
            session.degenerate.insert(*g);
        }
    }
    diagnose(&session, &state.order, state.mode, cal).map_err(ApiError::internal)
}

async fn session_report(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<DiagnosisReport>, ApiError> {
    let handle = app.store.get(&id).ok_or_else(|| ApiError::not_found("session_not_found", &id))?;
    let record = handle.lock().await;
    Ok(Json(report_for(&app.models, &record)?))
}

async fn list_models(State(app): State<Arc<AppState>>) -> Json<Vec<ModelSummary>> {
    Json(app.models.summaries())
}

async fn model_ranking(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let ranking = app.models.ranking(&id).ok_or_else(|| ApiError::not_found("model_not_found", &id))?;
    Ok(Json(ranking).into_response())
}
