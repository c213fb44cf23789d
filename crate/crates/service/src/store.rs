//! Live annotation sessions and their event logs.
//!
//! Every mutation goes through [`LiveSession::apply_event`]: the event is
//! applied to a copy, appended to the log and synced, and only then does the
//! copy replace the in-memory session. Recovery folds the same function over
//! the log, so the in-memory state is always the replay of the log.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use groundwork_core::corpus::{write_jsonl_to, write_tsv_to, LabelEntry};
use groundwork_core::engine::{
    replay, ClosedCgu, EngineError, Session, Timeline, TransitionReport,
};
use groundwork_core::model::{ActLabel, CguId, DialogAnnotation, LabelError, UtteranceFlag};
use serde::Serialize;
use thiserror::Error;
use tokio::sync::RwLock;

use crate::log::{self, Event};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown session `{0}`")]
    NotFound(String),
    #[error("utterance {got} is out of order (next expected: {expected:?})")]
    OutOfOrder { expected: Option<u32>, got: u32 },
    #[error("utterance {0} has not been labeled yet")]
    NotYetLabeled(u32),
    #[error("utterance {0} is not in the transcript")]
    UnknownUtterance(u32),
    #[error("a label batch needs at least one label (use act None for no act)")]
    EmptyLabels,
    #[error("utterance {utt_id}: {source}")]
    InvalidLabel {
        utt_id: u32,
        #[source]
        source: LabelError,
    },
    #[error("{0}")]
    Engine(EngineError),
    #[error("bad transcript: {0}")]
    BadTranscript(String),
    #[error("event log: {0}")]
    Io(#[from] io::Error),
}

/// One annotation session: the uploaded transcript, the labels accepted so
/// far and the engine state they produce.
#[derive(Debug, Clone, PartialEq)]
pub struct LiveSession {
    pub id: String,
    transcript: DialogAnnotation,
    draft: DialogAnnotation,
    session: Session,
    events: Vec<Event>,
    log_path: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct LabelOutcome {
    pub session_id: String,
    pub utt_id: u32,
    pub report: TransitionReport,
    pub open: Vec<CguId>,
    pub grounded: Vec<ClosedCgu>,
    pub applied: usize,
    pub next_utt_id: Option<u32>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub dialog_id: String,
    pub utterances: usize,
    pub applied: usize,
    pub next_utt_id: Option<u32>,
}

fn to_labels(utt_id: u32, entries: &[LabelEntry]) -> Result<Vec<ActLabel>, StoreError> {
    if entries.is_empty() {
        return Err(StoreError::EmptyLabels);
    }
    entries
        .iter()
        .map(|e| {
            let label = e.clone().into_label(utt_id);
            label
                .check()
                .map(|_| label)
                .map_err(|source| StoreError::InvalidLabel { utt_id, source })
        })
        .collect()
}

impl LiveSession {
    fn new(id: String, transcript: DialogAnnotation, log_path: PathBuf) -> Self {
        let mut transcript = transcript;
        transcript.labels.clear();
        transcript.derived.clear();
        LiveSession {
            session: Session::new(transcript.dialog_id.clone()),
            draft: transcript.clone(),
            events: vec![Event::Created {
                dialog: transcript.clone(),
            }],
            transcript,
            id,
            log_path,
        }
    }

    fn from_events(id: String, log_path: PathBuf, events: Vec<Event>) -> Result<Self, StoreError> {
        let mut events = events.into_iter();
        let Some(Event::Created { dialog }) = events.next() else {
            return Err(StoreError::BadTranscript("log does not start with a created event".into()));
        };
        let mut live = LiveSession::new(id, dialog, log_path);
        for e in events {
            live.apply_event(e)?;
        }
        Ok(live)
    }

    pub fn dialog(&self) -> &DialogAnnotation {
        &self.draft
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn applied(&self) -> usize {
        self.session.applied()
    }

    pub fn next_utt_id(&self) -> Option<u32> {
        self.draft.utterances.get(self.applied()).map(|u| u.id)
    }

    fn position(&self, utt_id: u32) -> Result<usize, StoreError> {
        self.draft
            .utterances
            .iter()
            .position(|u| u.id == utt_id)
            .ok_or(StoreError::UnknownUtterance(utt_id))
    }

    /// The labeled prefix of the draft.
    fn prefix(&self, len: usize) -> DialogAnnotation {
        let mut d = DialogAnnotation::new(self.draft.dialog_id.clone(), self.draft.corpus);
        let grouped = self.draft.labels_by_utterance();
        for (utt, labels) in self.draft.utterances[..len].iter().zip(grouped) {
            d.push(utt.clone(), labels.iter().cloned());
        }
        d
    }

    pub fn timeline(&self) -> Timeline {
        replay(&self.prefix(self.applied()))
            .expect("accepted labels always replay")
            .timeline
    }

    pub fn export_jsonl(&self) -> Vec<u8> {
        let mut out = Vec::new();
        write_jsonl_to(std::slice::from_ref(&self.draft), &mut out).expect("in-memory write");
        out
    }

    pub fn export_tsv(&self) -> Vec<u8> {
        let mut out = Vec::new();
        write_tsv_to(std::slice::from_ref(&self.draft), &mut out).expect("in-memory write");
        out
    }

    pub fn summary(&self) -> SessionSummary {
        SessionSummary {
            session_id: self.id.clone(),
            dialog_id: self.draft.dialog_id.clone(),
            utterances: self.draft.utterances.len(),
            applied: self.applied(),
            next_utt_id: self.next_utt_id(),
        }
    }

    fn outcome(&self, utt_id: u32, report: TransitionReport) -> LabelOutcome {
        LabelOutcome {
            session_id: self.id.clone(),
            utt_id,
            report,
            open: self.session.open_cgus(),
            grounded: self
                .session
                .cgus()
                .iter()
                .filter_map(|r| {
                    r.degree.map(|degree| ClosedCgu {
                        cgu: r.id.clone(),
                        degree,
                    })
                })
                .collect(),
            applied: self.applied(),
            next_utt_id: self.next_utt_id(),
        }
    }

    /// Applies one logged event to this session in memory.
    fn apply_event(&mut self, event: Event) -> Result<TransitionReport, StoreError> {
        let report = match &event {
            Event::Created { .. } => {
                return Err(StoreError::BadTranscript("duplicate created event".into()))
            }
            Event::Labels { utt_id, labels } => {
                let pos = self.position(*utt_id)?;
                if pos != self.applied() {
                    return Err(StoreError::OutOfOrder {
                        expected: self.next_utt_id(),
                        got: *utt_id,
                    });
                }
                let labels = to_labels(*utt_id, labels)?;
                let report = self
                    .session
                    .apply(&self.draft.utterances[pos], &labels)
                    .map_err(StoreError::Engine)?;
                self.draft.labels.extend(labels);
                self.events.push(event.clone());
                report
            }
            Event::Revise { utt_id, labels } => {
                let pos = self.position(*utt_id)?;
                // During recovery the log holds nothing past the revised
                // utterance, so it may equal the next one to label.
                if pos > self.applied() {
                    return Err(StoreError::NotYetLabeled(*utt_id));
                }
                let labels = to_labels(*utt_id, labels)?;
                let kept: std::collections::HashSet<u32> =
                    self.draft.utterances[..pos].iter().map(|u| u.id).collect();
                let mut draft = self.draft.clone();
                draft.labels.retain(|l| kept.contains(&l.utterance_id));
                draft.utterances[pos + 1..].clone_from_slice(&self.transcript.utterances[pos + 1..]);
                draft.utterances[pos].flags.insert(UtteranceFlag::Revised);
                let before = LiveSession {
                    draft,
                    ..self.clone()
                };
                let mut session = replay(&before.prefix(pos))
                    .expect("accepted labels always replay")
                    .session;
                let report = session
                    .apply(&before.draft.utterances[pos], &labels)
                    .map_err(StoreError::Engine)?;
                self.draft = before.draft;
                self.draft.labels.extend(labels);
                self.session = session;
                self.events
                    .retain(|e| e.utt_id().is_none_or(|u| kept.contains(&u)));
                self.events.push(event.clone());
                report
            }
        };
        Ok(report)
    }
}

/// All sessions, each behind its own lock so that writes to one session are
/// serialized while other sessions proceed.
#[derive(Debug)]
pub struct SessionStore {
    data_dir: PathBuf,
    sessions: RwLock<HashMap<String, Arc<RwLock<LiveSession>>>>,
}

#[derive(Debug)]
pub struct RecoveryReport {
    pub recovered: Vec<String>,
    pub torn: Vec<String>,
    pub failed: Vec<(PathBuf, String)>,
}

impl SessionStore {
    /// Opens `data_dir`, replaying every `*.log` found there.
    pub fn open(data_dir: &Path) -> io::Result<(SessionStore, RecoveryReport)> {
        fs::create_dir_all(data_dir)?;
        let mut sessions = HashMap::new();
        let mut report = RecoveryReport {
            recovered: Vec::new(),
            torn: Vec::new(),
            failed: Vec::new(),
        };
        let mut paths: Vec<PathBuf> = fs::read_dir(data_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "log"))
            .collect();
        paths.sort();
        for path in paths {
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let loaded = match log::read(&path) {
                Ok(l) => l,
                Err(e) => {
                    report.failed.push((path, e.to_string()));
                    continue;
                }
            };
            match LiveSession::from_events(id.clone(), path.clone(), loaded.events) {
                Ok(live) => {
                    if loaded.torn_tail {
                        // Drop the partial line so later appends start clean.
                        log::rewrite(&path, live.events())?;
                        report.torn.push(id.clone());
                    }
                    sessions.insert(id.clone(), Arc::new(RwLock::new(live)));
                    report.recovered.push(id);
                }
                Err(e) => report.failed.push((path, e.to_string())),
            }
        }
        Ok((
            SessionStore {
                data_dir: data_dir.to_path_buf(),
                sessions: RwLock::new(sessions),
            },
            report,
        ))
    }

    /// Starts a session from a transcript. Labels already present on a
    /// leading run of utterances are accepted as if posted in order.
    pub async fn create(&self, transcript: DialogAnnotation) -> Result<SessionSummary, StoreError> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let path = self.data_dir.join(format!("{id}.log"));
        let grouped: Vec<Vec<ActLabel>> = transcript
            .labels_by_utterance()
            .into_iter()
            .map(|l| l.to_vec())
            .collect();
        let labeled = grouped.iter().rposition(|l| !l.is_empty()).map_or(0, |p| p + 1);
        if let Some(gap) = grouped[..labeled].iter().position(|l| l.is_empty()) {
            return Err(StoreError::BadTranscript(format!(
                "utterance {} has no labels but later utterances do",
                transcript.utterances[gap].id
            )));
        }
        let mut live = LiveSession::new(id.clone(), transcript.clone(), path.clone());
        for (utt, labels) in transcript.utterances.iter().zip(&grouped).take(labeled) {
            live.apply_event(Event::Labels {
                utt_id: utt.id,
                labels: labels.iter().map(LabelEntry::from).collect(),
            })?;
        }
        log::rewrite(&path, live.events())?;
        let summary = live.summary();
        self.sessions
            .write()
            .await
            .insert(id, Arc::new(RwLock::new(live)));
        Ok(summary)
    }

    pub async fn get(&self, id: &str) -> Result<Arc<RwLock<LiveSession>>, StoreError> {
        self.sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::NotFound(id.to_string()))
    }

    pub async fn post_labels(
        &self,
        id: &str,
        utt_id: u32,
        labels: Vec<LabelEntry>,
    ) -> Result<LabelOutcome, StoreError> {
        let handle = self.get(id).await?;
        let mut live = handle.write().await;
        let event = Event::Labels { utt_id, labels };
        let mut next = live.clone();
        let report = next.apply_event(event.clone())?;
        log::append(&live.log_path, &event)?;
        *live = next;
        Ok(live.outcome(utt_id, report))
    }

    pub async fn revise(
        &self,
        id: &str,
        utt_id: u32,
        labels: Vec<LabelEntry>,
    ) -> Result<LabelOutcome, StoreError> {
        let handle = self.get(id).await?;
        let mut live = handle.write().await;
        if live.position(utt_id)? >= live.applied() {
            return Err(StoreError::NotYetLabeled(utt_id));
        }
        let mut next = live.clone();
        let report = next.apply_event(Event::Revise { utt_id, labels })?;
        log::rewrite(&live.log_path, next.events())?;
        *live = next;
        Ok(live.outcome(utt_id, report))
    }
}
