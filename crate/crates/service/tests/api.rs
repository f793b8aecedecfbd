use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use glyphscreen_core::diagnosis::{
    calibrate_threshold, d_statistic, diagnose, full_glyph_set, rank_discriminative, score_session, ChildSession,
    DiagnosisReport, SubsetMode,
};
use glyphscreen_core::glyph::{GlyphClass, GlyphRecording};
use glyphscreen_core::harness::{ModelBundle, BUNDLE_FORMAT};
use glyphscreen_core::recognizer::{PreprocessConfig, RecognizerKind, TrainedRecognizer, TrainingHyper};
use glyphscreen_core::synth::{generate_corpus, CorpusConfig};
use glyphscreen_service::api::SubmitResponse;
use glyphscreen_service::store::{load_sessions, SessionState, SessionStatus};
use glyphscreen_service::{open_state, router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn g(c: char) -> GlyphClass {
    GlyphClass::from_char(c).unwrap()
}

fn write_bundle(dir: &Path, id: &str, seed: u64) -> ModelBundle {
    let model = TrainedRecognizer::initialize(RecognizerKind::Rnn, TrainingHyper { seed, ..TrainingHyper::default() }, PreprocessConfig::default());
    let td = full_glyph_set().into_iter().map(|g| (g, 0.9)).collect();
    let dys = full_glyph_set().into_iter().map(|g| (g, g.index() as f64 / 100.0)).collect();
    let ranking = rank_discriminative(&td, &dys).unwrap();
    let mut cal = calibrate_threshold(&(0..20).map(|i| 0.0265 + i as f64 * 1e-5).collect::<Vec<_>>(), 0.086).unwrap();
    cal.fold = Some(0);
    let bundle = ModelBundle {
        format: BUNDLE_FORMAT.into(),
        model_id: id.into(),
        model: model.to_document(),
        calibration: Some(cal.clone()),
        subset: ranking.top(15),
        subset_calibration: Some(cal),
        ranking,
    };
    std::fs::write(dir.join(format!("{id}.json")), serde_json::to_string(&bundle).unwrap()).unwrap();
    bundle
}

struct Fixture {
    models: tempfile::TempDir,
    data: tempfile::TempDir,
    app: Arc<AppState>,
    child: Vec<GlyphRecording>,
}

impl Fixture {
    fn new() -> Self {
        let models = tempfile::tempdir().unwrap();
        let data = tempfile::tempdir().unwrap();
        write_bundle(models.path(), "rnn-fold0", 4);
        let app = open_state(models.path(), data.path()).unwrap();
        let child = generate_corpus(&CorpusConfig::new(1, 0, 21)).unwrap();
        Fixture { models, data, app, child }
    }

    fn reopen(&mut self) {
        self.app = open_state(self.models.path(), self.data.path()).unwrap();
    }

    async fn call(&self, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
        let req = req.body(body.map_or(Body::empty(), |b| Body::from(b.to_string()))).unwrap();
        let resp = router(self.app.clone()).oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        (status, if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() })
    }

    async fn create(&self, mode: &str, seed: u64) -> SessionState {
        let (status, body) = self.call("POST", "/sessions", Some(json!({"model_id": "rnn-fold0", "mode": mode, "seed": seed}))).await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        serde_json::from_value(body).unwrap()
    }

    fn samples(&self, glyph: GlyphClass) -> Value {
        let rec = self.child.iter().find(|r| r.requested == glyph).unwrap();
        json!(rec.samples.iter().map(|s| json!([s.t_ms, s.x_mm, s.y_mm, u8::from(s.pen_down), s.pressure])).collect::<Vec<_>>())
    }

    async fn submit(&self, id: &str, glyph: GlyphClass) -> (StatusCode, Value) {
        self.call("POST", &format!("/sessions/{id}/glyphs"), Some(json!({"glyph": glyph.as_char().to_string(), "samples": self.samples(glyph)}))).await
    }

    async fn complete(&self, state: &SessionState) -> Vec<SubmitResponse> {
        let mut out = Vec::new();
        for glyph in &state.order {
            let (status, body) = self.submit(&state.session_id, *glyph).await;
            assert_eq!(status, StatusCode::OK, "{body}");
            out.push(serde_json::from_value(body).unwrap());
        }
        out
    }
}

#[tokio::test]
async fn sessions_get_seeded_dictation_orders() {
    let f = Fixture::new();
    let a = f.create("full36", 7).await;
    let b = f.create("full36", 7).await;
    let c = f.create("full36", 8).await;
    assert_ne!(a.session_id, b.session_id);
    assert_eq!(a.order, b.order);
    assert_ne!(a.order, c.order);
    assert_eq!(a.order.iter().copied().collect::<BTreeSet<_>>(), full_glyph_set().into_iter().collect());
    assert_eq!(a.status, SessionStatus::Open);

    let sub = f.create("discriminative15", 7).await;
    let bundle = f.app.models.get("rnn-fold0").unwrap();
    assert_eq!(sub.order.len(), 15);
    assert_eq!(sub.order.iter().collect::<BTreeSet<_>>(), bundle.bundle.subset.iter().collect());

    let (status, body) = f.call("POST", "/sessions", Some(json!({"model_id": "nope", "mode": "full36", "seed": 1}))).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::NOT_FOUND, Some("model_not_found")));
    let (status, body) = f.call("POST", "/sessions", Some(json!({"model_id": "rnn-fold0", "mode": "half", "seed": 1}))).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("invalid_body")));
}

#[tokio::test]
async fn full_session_scores_like_the_offline_pipeline() {
    let f = Fixture::new();
    let state = f.create("full36", 3).await;
    let (status, body) = f.call("GET", &format!("/sessions/{}/report", state.session_id), None).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::CONFLICT, Some("session_incomplete")));
    assert_eq!(body["missing"].as_array().unwrap().len(), 36);

    let responses = f.complete(&state).await;
    assert_eq!(responses[0].running_d, responses[0].requested_score);
    assert_eq!(responses[35].remaining, vec![]);
    assert_eq!(responses[35].status, SessionStatus::Complete);
    assert_eq!(responses[10].remaining, state.order[11..].to_vec());

    // offline scoring of the same recordings with the same model
    let model = &f.app.models.get("rnn-fold0").unwrap();
    let mut session = ChildSession::new(&state.session_id, glyphscreen_core::glyph::Group::TypicallyDeveloping);
    for r in &f.child {
        session.recordings.insert(r.requested, r.clone());
    }
    let scored = score_session(&model.recognizer, &session, None).unwrap();
    for resp in &responses {
        assert_eq!(resp.requested_score.to_bits(), scored.scores[&resp.glyph].to_bits());
        assert_eq!(resp.top5.len(), 5);
        assert!(resp.top5.windows(2).all(|w| w[0].probability >= w[1].probability));
    }
    assert_eq!(responses[35].running_d.to_bits(), d_statistic(&scored).unwrap().to_bits());

    let (status, first) = f.call("GET", &format!("/sessions/{}/report", state.session_id), None).await;
    assert_eq!(status, StatusCode::OK);
    let (_, second) = f.call("GET", &format!("/sessions/{}/report", state.session_id), None).await;
    assert_eq!(first, second);
    let report: DiagnosisReport = serde_json::from_value(first).unwrap();
    let offline = diagnose(&scored, &full_glyph_set(), SubsetMode::Full36, model.bundle.calibration.as_ref().unwrap()).unwrap();
    assert_eq!(report.d.to_bits(), offline.d.to_bits());
    assert_eq!(report.verdict, offline.verdict);
    assert_eq!(report.threshold, offline.threshold);

    // the exported session is the recordings that were scored
    let exported = load_sessions(f.data.path()).unwrap()[&state.session_id].export();
    assert_eq!(exported.len(), 36);
    for r in &exported {
        let orig = f.child.iter().find(|o| o.requested == r.requested).unwrap();
        assert_eq!(r.samples, orig.samples);
        assert_eq!(r.child_id, state.session_id);
    }

    let (status, body) = f.submit(&state.session_id, g('a')).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::CONFLICT, Some("session_closed")));
}

#[tokio::test]
async fn duplicates_and_bad_submissions_leave_state_unchanged() {
    let f = Fixture::new();
    let state = f.create("discriminative15", 5).await;
    let id = &state.session_id;
    let first = state.order[0];
    assert_eq!(f.submit(id, first).await.0, StatusCode::OK);
    let (status, body) = f.submit(id, first).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::CONFLICT, Some("glyph_already_scored")));

    let outside = full_glyph_set().into_iter().find(|g| !state.order.contains(g)).unwrap();
    let (status, body) = f.submit(id, outside).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("glyph_not_dictated")));

    let uri = format!("/sessions/{id}/glyphs");
    let cases = [
        (json!({"glyph": "a", "samples": []}), "empty_samples"),
        (json!({"glyph": "a", "samples": [[5.0, 0.0, 0.0, 1, null], [1.0, 1.0, 1.0, 1, null]]}), "non_monotone_time"),
        (json!({"glyph": "a", "samples": [[0.0, 0.0, 0.0, 2, null]]}), "invalid_pen"),
        (json!({"glyph": "a", "samples": [[0.0, 0.0, 0.0, 0, null]]}), "no_pen_down"),
        (json!({"glyph": "a", "samples": [[0.0, 0.0, 0.0, 1, 1.5]]}), "pressure_out_of_range"),
        (json!({"glyph": "ab", "samples": [[0.0, 0.0, 0.0, 1, null]]}), "invalid_glyph"),
        (json!({"glyph": "*", "samples": [[0.0, 0.0, 0.0, 1, null]]}), "star_requested"),
        (json!({"samples": []}), "invalid_body"),
    ];
    for (body, code) in cases {
        let (status, resp) = f.call("POST", &uri, Some(body)).await;
        assert_eq!((status, resp["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some(code)));
    }
    let (status, body) = f.submit("s999999", g('a')).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::NOT_FOUND, Some("session_not_found")));

    let record = f.app.store.get(id).unwrap();
    let record = record.lock().await;
    assert_eq!(record.state.completed.len(), 1);
    assert_eq!(load_sessions(f.data.path()).unwrap()[id.as_str()], *record);
}

#[tokio::test]
async fn degenerate_trace_scores_uniform() {
    let f = Fixture::new();
    let state = f.create("full36", 1).await;
    let glyph = state.order[0];
    let body = json!({"glyph": glyph.as_char().to_string(), "samples": [[0.0, 3.0, 3.0, 1, null], [5.0, 3.0, 3.0, 1, null]]});
    let (status, resp) = f.call("POST", &format!("/sessions/{}/glyphs", state.session_id), Some(body)).await;
    assert_eq!(status, StatusCode::OK);
    let resp: SubmitResponse = serde_json::from_value(resp).unwrap();
    assert!(resp.degenerate);
    assert_eq!(resp.requested_score, 1.0 / 37.0);
}

#[tokio::test]
async fn sessions_survive_restart_with_identical_reports() {
    let mut f = Fixture::new();
    // two full sessions cross the snapshot interval, so recovery reads both
    // the snapshot and the log tail
    let a = f.create("full36", 11).await;
    let b = f.create("full36", 12).await;
    f.complete(&a).await;
    f.complete(&b).await;
    let c = f.create("full36", 13).await;
    f.submit(&c.session_id, c.order[0]).await;
    assert!(f.data.path().join("snapshot.json").exists());

    let mut before = Vec::new();
    for s in [&a, &b] {
        before.push(f.call("GET", &format!("/sessions/{}/report", s.session_id), None).await);
    }
    f.reopen();
    for (s, expected) in [&a, &b].into_iter().zip(&before) {
        assert_eq!(&f.call("GET", &format!("/sessions/{}/report", s.session_id), None).await, expected);
    }
    let (status, resp) = f.submit(&c.session_id, c.order[1]).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(resp["remaining"].as_array().unwrap().len(), 34);
    let d = f.create("full36", 14).await;
    assert!(![&a, &b, &c].iter().any(|s| s.session_id == d.session_id));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_duplicate_submissions_serialize() {
    let f = Arc::new(Fixture::new());
    let state = f.create("full36", 2).await;
    let glyph = state.order[0];
    let mut tasks = Vec::new();
    for _ in 0..6 {
        let (f, id) = (f.clone(), state.session_id.clone());
        tasks.push(tokio::spawn(async move { f.submit(&id, glyph).await.0 }));
    }
    let mut statuses = Vec::new();
    for t in tasks {
        statuses.push(t.await.unwrap());
    }
    assert_eq!(statuses.iter().filter(|s| **s == StatusCode::OK).count(), 1);
    assert_eq!(statuses.iter().filter(|s| **s == StatusCode::CONFLICT).count(), 5);
}

#[tokio::test]
async fn model_listing_and_ranking() {
    let f = Fixture::new();
    let (status, body) = f.call("GET", "/models", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body[0]["model_id"], "rnn-fold0");
    assert_eq!(body[0]["kind"], "rnn");
    assert!(body[0]["calibration"]["threshold"].is_number());
    let (status, body) = f.call("GET", "/models/rnn-fold0/discriminative", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["entries"].as_array().unwrap().len(), 36);
    assert_eq!(body["entries"][0]["glyph"], "a");
    let (status, _) = f.call("GET", "/models/x/discriminative", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = f.call("GET", "/sessions/x/report", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}
