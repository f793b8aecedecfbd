//! Session persistence: an append-only JSONL event log plus a periodic
//! snapshot. Replaying the log over the snapshot rebuilds every session
//! exactly, because live updates go through the same `apply` as replay.
//!
//! `sessions.log` holds one event per line:
//!
//! ```text
//! {"event":"created","seq":n,"session":SessionRecord}
//! {"event":"scored","seq":n,"session_id":str,"glyph":"a","scored":ScoredGlyph,"recording":StoredRecording}
//! ```
//!
//! `snapshot.json` is `{"sessions":[SessionRecord,...]}`; each record keeps
//! the sequence number of the last event applied to it, so replay skips
//! what the snapshot already contains.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex as StdMutex, RwLock};

use glyphscreen_core::diagnosis::SubsetMode;
use glyphscreen_core::glyph::{GlyphClass, GlyphRecording, Group, RecordingMeta, SamplePoint};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Mutex;

pub const LOG_FILE: &str = "sessions.log";
pub const SNAPSHOT_FILE: &str = "snapshot.json";
pub const SNAPSHOT_EVERY: u64 = 64;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{file} line {line}: {message}")]
    Corrupt { file: String, line: usize, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Open,
    Complete,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopClass {
    pub glyph: GlyphClass,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredGlyph {
    pub score: f64,
    pub degenerate: bool,
    pub top5: Vec<TopClass>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    /// Milliseconds since the Unix epoch.
    pub created_at: u64,
    pub model_id: String,
    pub mode: SubsetMode,
    pub seed: u64,
    pub order: Vec<GlyphClass>,
    pub completed: BTreeMap<GlyphClass, ScoredGlyph>,
    pub status: SessionStatus,
}

impl SessionState {
    pub fn remaining(&self) -> Vec<GlyphClass> {
        self.order.iter().copied().filter(|g| !self.completed.contains_key(g)).collect()
    }
}

/// Raw samples as submitted, `[t, x, y, pen, pressure|null]`.
pub type RawSample = (f64, f64, f64, u8, Option<f64>);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredRecording {
    pub sampling_hz: f64,
    pub resolution_mm: f64,
    pub samples: Vec<RawSample>,
}

impl StoredRecording {
    pub fn from_points(points: &[SamplePoint], meta: RecordingMeta) -> Self {
        StoredRecording {
            sampling_hz: meta.sampling_hz,
            resolution_mm: meta.resolution_mm,
            samples: points.iter().map(|s| (s.t_ms, s.x_mm, s.y_mm, u8::from(s.pen_down), s.pressure)).collect(),
        }
    }

    /// The recording as the recognizers see it. Sessions carry no group, so
    /// every recording is tagged typically developing; scoring ignores it.
    pub fn to_recording(&self, session_id: &str, glyph: GlyphClass) -> GlyphRecording {
        GlyphRecording {
            child_id: session_id.to_string(),
            group: Group::TypicallyDeveloping,
            requested: glyph,
            samples: self
                .samples
                .iter()
                .map(|&(t, x, y, pen, pressure)| SamplePoint { t_ms: t, x_mm: x, y_mm: y, pen_down: pen == 1, pressure })
                .collect(),
            meta: RecordingMeta { sampling_hz: self.sampling_hz, resolution_mm: self.resolution_mm },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub state: SessionState,
    pub recordings: BTreeMap<GlyphClass, StoredRecording>,
    pub last_seq: u64,
}

impl SessionRecord {
    /// Recordings in dictation order, ready for the offline tools.
    pub fn export(&self) -> Vec<GlyphRecording> {
        self.state
            .order
            .iter()
            .filter_map(|g| self.recordings.get(g).map(|r| r.to_recording(&self.state.session_id, *g)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
pub enum Event {
    Created { seq: u64, session: SessionRecord },
    Scored { seq: u64, session_id: String, glyph: GlyphClass, scored: ScoredGlyph, recording: StoredRecording },
}

impl Event {
    pub fn seq(&self) -> u64 {
        match self {
            Event::Created { seq, .. } | Event::Scored { seq, .. } => *seq,
        }
    }
}

/// Applies a scoring event to its session. Shared by live updates and replay.
pub fn apply_scored(record: &mut SessionRecord, seq: u64, glyph: GlyphClass, scored: ScoredGlyph, recording: StoredRecording) {
    record.state.completed.insert(glyph, scored);
    record.recordings.insert(glyph, recording);
    if record.state.remaining().is_empty() {
        record.state.status = SessionStatus::Complete;
    }
    record.last_seq = seq;
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    sessions: Vec<SessionRecord>,
}

pub type SessionHandle = Arc<Mutex<SessionRecord>>;

pub struct SessionStore {
    dir: PathBuf,
    log: StdMutex<File>,
    next_seq: AtomicU64,
    sessions: RwLock<HashMap<String, SessionHandle>>,
    snapshot_lock: Mutex<()>,
}

fn read_log(path: &Path) -> Result<Vec<Event>, StoreError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let lines: Vec<&str> = text.split('\n').collect();
    let mut events = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Event>(line) {
            Ok(e) => events.push(e),
            // a torn final line from a crash mid-append never took effect
            Err(_) if i + 1 == lines.len() => break,
            Err(e) => return Err(StoreError::Corrupt { file: LOG_FILE.into(), line: i + 1, message: e.to_string() }),
        }
    }
    Ok(events)
}

/// Rebuilds every session from the snapshot and log in `dir`.
pub fn load_sessions(dir: &Path) -> Result<BTreeMap<String, SessionRecord>, StoreError> {
    let mut sessions: BTreeMap<String, SessionRecord> = BTreeMap::new();
    match std::fs::read_to_string(dir.join(SNAPSHOT_FILE)) {
        Ok(text) => {
            let snap: Snapshot = serde_json::from_str(&text)
                .map_err(|e| StoreError::Corrupt { file: SNAPSHOT_FILE.into(), line: e.line(), message: e.to_string() })?;
            for s in snap.sessions {
                sessions.insert(s.state.session_id.clone(), s);
            }
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
        Err(e) => return Err(e.into()),
    }
    for event in read_log(&dir.join(LOG_FILE))? {
        match event {
            Event::Created { session, .. } => {
                sessions.entry(session.state.session_id.clone()).or_insert(session);
            }
            Event::Scored { seq, session_id, glyph, scored, recording } => {
                if let Some(rec) = sessions.get_mut(&session_id) {
                    if seq > rec.last_seq {
                        apply_scored(rec, seq, glyph, scored, recording);
                    }
                }
            }
        }
    }
    Ok(sessions)
}

impl SessionStore {
    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        std::fs::create_dir_all(dir)?;
        let sessions = load_sessions(dir)?;
        let last = read_log(&dir.join(LOG_FILE))?.last().map_or(0, Event::seq);
        let last = sessions.values().map(|s| s.last_seq).fold(last, u64::max);
        let log = OpenOptions::new().create(true).append(true).open(dir.join(LOG_FILE))?;
        Ok(SessionStore {
            dir: dir.to_path_buf(),
            log: StdMutex::new(log),
            next_seq: AtomicU64::new(last + 1),
            sessions: RwLock::new(sessions.into_iter().map(|(k, v)| (k, Arc::new(Mutex::new(v)))).collect()),
            snapshot_lock: Mutex::new(()),
        })
    }

    pub fn get(&self, session_id: &str) -> Option<SessionHandle> {
        self.sessions.read().expect("session index").get(session_id).cloned()
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().expect("session index").len()
    }

    /// Reserves the next sequence number; ids of new sessions derive from it.
    pub fn next_seq(&self) -> u64 {
        self.next_seq.fetch_add(1, Ordering::SeqCst)
    }

    /// Appends one event and flushes it to disk before returning.
    pub fn append(&self, event: &Event) -> Result<(), StoreError> {
        let mut line = serde_json::to_string(event).expect("event serializes");
        line.push('\n');
        let mut log = self.log.lock().expect("log file");
        log.write_all(line.as_bytes())?;
        log.sync_data()?;
        Ok(())
    }

    pub fn insert(&self, record: SessionRecord) -> SessionHandle {
        let id = record.state.session_id.clone();
        let handle = Arc::new(Mutex::new(record));
        self.sessions.write().expect("session index").insert(id, handle.clone());
        handle
    }

    pub async fn maybe_snapshot(&self, seq: u64) -> Result<(), StoreError> {
        if seq % SNAPSHOT_EVERY == 0 {
            self.snapshot().await?;
        }
        Ok(())
    }

    /// Writes every session to `snapshot.json` via a temp file and rename.
    pub async fn snapshot(&self) -> Result<(), StoreError> {
        let _guard = self.snapshot_lock.lock().await;
        let handles: Vec<(String, SessionHandle)> =
            self.sessions.read().expect("session index").iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        let mut sessions = Vec::with_capacity(handles.len());
        for (_, h) in handles {
            sessions.push(h.lock().await.clone());
        }
        sessions.sort_by(|a, b| a.state.session_id.cmp(&b.state.session_id));
        let tmp = self.dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        std::fs::write(&tmp, serde_json::to_vec(&Snapshot { sessions }).expect("snapshot serializes"))?;
        std::fs::rename(tmp, self.dir.join(SNAPSHOT_FILE))?;
        Ok(())
    }
}
