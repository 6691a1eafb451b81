//! One live interpretation session: the pipeline plus its wire-level history
//! and an optional append-only journal.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::aaf::Budget;
use crate::model::{parse_model, serialize_model, Event, Knowledge};
use crate::pipeline::{Analysis, PipelineError, Predictor, Uniform};
use crate::reasoner::{ReasonerError, Session};
use crate::tagger::{DecodingState, Tagger, TaggerError};

use super::wire::*;
use super::ServiceError;

/// A trained tagger, or uniform mass when the session has none.
#[derive(Debug, Clone)]
pub enum LivePredictor {
    Tagger(Arc<Tagger>),
    Uniform(Uniform),
}

#[derive(Debug, Clone)]
pub enum LiveState {
    Tagger(DecodingState),
    Uniform,
}

impl Predictor for LivePredictor {
    type State = LiveState;

    fn activity_count(&self) -> usize {
        match self {
            LivePredictor::Tagger(t) => t.activity_count(),
            LivePredictor::Uniform(u) => u.0,
        }
    }

    fn start(&self) -> LiveState {
        match self {
            LivePredictor::Tagger(t) => LiveState::Tagger(t.init()),
            LivePredictor::Uniform(_) => LiveState::Uniform,
        }
    }

    fn predict(&self, state: &mut LiveState, e: &Event) -> Result<Vec<f64>, TaggerError> {
        match (self, state) {
            (LivePredictor::Tagger(t), LiveState::Tagger(s)) => t.predict(s, e),
            (LivePredictor::Uniform(u), LiveState::Uniform) => u.predict(&mut (), e),
            _ => Err(TaggerError::StateMismatch),
        }
    }
}

impl From<PipelineError> for ServiceError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Reasoner(r) => r.into(),
            other => ServiceError::BadRequest(other.to_string()),
        }
    }
}

impl From<ReasonerError> for ServiceError {
    fn from(e: ReasonerError) -> Self {
        if e.is_overflow() {
            ServiceError::Overflow(e.to_string())
        } else {
            ServiceError::BadRequest(e.to_string())
        }
    }
}

/// One journal line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JournalEntry {
    Created {
        v: u32,
        id: String,
        /// Canonical model document, so a replay needs no model directory.
        model_doc: String,
        model: String,
        tagger: Option<String>,
        config: ApiConfig,
        created_unix_ms: u64,
    },
    Event {
        v: u32,
        event: ApiEvent,
        result: ApiStep,
    },
    Finalized {
        v: u32,
        summary: ApiSummary,
    },
}

/// Append-only JSON-lines log, flushed after every entry.
#[derive(Debug)]
pub struct Journal {
    path: PathBuf,
    file: File,
}

impl Journal {
    pub fn create(path: &Path) -> Result<Self, ServiceError> {
        let file = OpenOptions::new().create_new(true).append(true).open(path)?;
        Ok(Journal { path: path.to_path_buf(), file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn append(&mut self, entry: &JournalEntry) -> Result<(), ServiceError> {
        let mut line = serde_json::to_string(entry).expect("journal entries serialize");
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.flush()?;
        Ok(())
    }
}

pub fn read_journal(path: &Path) -> Result<Vec<JournalEntry>, ServiceError> {
    let mut out = Vec::new();
    for (n, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| ServiceError::BadRequest(format!("{}: line {}: {e}", path.display(), n + 1)))?,
        );
    }
    Ok(out)
}

fn unix_ms(t: SystemTime) -> u64 {
    t.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

/// What a session is built from.
#[derive(Debug, Clone)]
pub struct SessionSpec {
    pub knowledge: Arc<Knowledge>,
    /// Label for the model: its file name, or `inline`.
    pub model: String,
    pub tagger: Option<(String, Arc<Tagger>)>,
    pub config: ApiConfig,
}

pub struct LiveSession {
    id: String,
    spec: SessionSpec,
    created: SystemTime,
    analysis: Analysis<LivePredictor>,
    steps: Vec<ApiStep>,
    summary: Option<ApiSummary>,
    journal: Option<Journal>,
}

impl std::fmt::Debug for LiveSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LiveSession").field("id", &self.id).field("events", &self.steps.len()).finish()
    }
}

impl LiveSession {
    pub fn new(id: String, spec: SessionSpec, journal: Option<Journal>) -> Result<Self, ServiceError> {
        let k = &spec.knowledge;
        let predictor = match &spec.tagger {
            Some((_, t)) => {
                if !t.fits(&k.mapping) {
                    return Err(ServiceError::BadRequest(
                        "tagger was trained for different activities or event types".into(),
                    ));
                }
                LivePredictor::Tagger(Arc::clone(t))
            }
            None => LivePredictor::Uniform(Uniform(k.activity_count())),
        };
        let mut session = Session::new(Arc::clone(k));
        if let Some(nodes) = spec.config.budget {
            session = session.with_budget(Budget { nodes });
        }
        let analysis = Analysis::with_session(session, predictor, spec.config.pipeline())?;
        let created = SystemTime::now();
        let mut live = LiveSession { id, spec, created, analysis, steps: Vec::new(), summary: None, journal };
        let entry = JournalEntry::Created {
            v: API_VERSION,
            id: live.id.clone(),
            model_doc: serialize_model(&live.spec.knowledge),
            model: live.spec.model.clone(),
            tagger: live.spec.tagger.as_ref().map(|(n, _)| n.clone()),
            config: live.spec.config.clone(),
            created_unix_ms: unix_ms(created),
        };
        live.log(&entry)?;
        Ok(live)
    }

    fn log(&mut self, entry: &JournalEntry) -> Result<(), ServiceError> {
        match &mut self.journal {
            Some(j) => j.append(entry),
            None => Ok(()),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn knowledge(&self) -> &Arc<Knowledge> {
        &self.spec.knowledge
    }

    pub fn analysis(&self) -> &Analysis<LivePredictor> {
        &self.analysis
    }

    pub fn steps(&self) -> &[ApiStep] {
        &self.steps
    }

    pub fn summary(&self) -> Option<&ApiSummary> {
        self.summary.as_ref()
    }

    pub fn journal_path(&self) -> Option<&Path> {
        self.journal.as_ref().map(Journal::path)
    }

    /// Runs the pipeline on the next event. A rejected event leaves the session unchanged.
    pub fn push(&mut self, ev: &ApiEvent) -> Result<ApiStep, ServiceError> {
        let e = ev.to_event(&self.spec.knowledge, self.steps.len() + 1)?;
        let r = self.analysis.process_event(&e)?;
        let step = ApiStep::new(&self.spec.knowledge, &e, &r);
        self.steps.push(step.clone());
        let event = ApiEvent::from_event(&self.spec.knowledge, &e);
        self.log(&JournalEntry::Event { v: API_VERSION, event, result: step.clone() })?;
        Ok(step)
    }

    pub fn query(&self, q: &ApiQuery) -> Result<ApiAnswer, ServiceError> {
        let query = q.resolve(&self.spec.knowledge)?;
        Ok(ApiAnswer::new(&self.spec.knowledge, &self.analysis.session().answer(&query)?))
    }

    pub fn explain(&self, q: &ApiExplain) -> Result<ApiExplanation, ServiceError> {
        check_version(q.v)?;
        let k = &self.spec.knowledge;
        let activity = k.mapping.activity(&q.activity).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        let session = self.analysis.session();
        match (q.step, q.instance) {
            (Some(step), Some(instance)) => {
                let query = crate::reasoner::Query::exact(q.index, activity, step, instance);
                Ok(ApiExplanation::exact(k, &session.explain(&query)?))
            }
            (None, None) => Ok(ApiExplanation::activity(k, &session.explain_activity(q.index, activity)?)),
            _ => Err(ServiceError::BadRequest("give both step and instance, or neither".into())),
        }
    }

    /// Closes the trace; finalizing again returns the same summary.
    pub fn finalize(&mut self) -> Result<ApiSummary, ServiceError> {
        if let Some(s) = &self.summary {
            return Ok(s.clone());
        }
        let s = ApiSummary::new(&self.spec.knowledge, &self.analysis.finalize()?);
        self.summary = Some(s.clone());
        self.log(&JournalEntry::Finalized { v: API_VERSION, summary: s.clone() })?;
        Ok(s)
    }

    pub fn is_finalized(&self) -> bool {
        self.summary.is_some()
    }

    pub fn state(&self) -> ApiState {
        let k = &self.spec.knowledge;
        ApiState {
            v: API_VERSION,
            id: self.id.clone(),
            model: self.spec.model.clone(),
            tagger: self.spec.tagger.as_ref().map(|(n, _)| n.clone()),
            k: self.analysis.k(),
            config: self.spec.config.clone(),
            created_unix_ms: unix_ms(self.created),
            finalized: self.is_finalized(),
            events: self.analysis.session().events().iter().map(|e| ApiEvent::from_event(k, e)).collect(),
            results: self.steps.clone(),
            summary: self.summary.clone(),
        }
    }
}

/// Rebuilds a session from its journal and checks that every recorded result
/// is reproduced exactly. `tagger` must be the artifact the journal names.
pub fn replay(entries: &[JournalEntry], tagger: Option<Arc<Tagger>>) -> Result<LiveSession, ServiceError> {
    let Some(JournalEntry::Created { id, model_doc, model, tagger: tagger_name, config, .. }) = entries.first() else {
        return Err(ServiceError::BadRequest("journal does not start with a created entry".into()));
    };
    let knowledge = Arc::new(parse_model(model_doc).map_err(|e| ServiceError::BadRequest(e.to_string()))?);
    let tagger = match (tagger_name, tagger) {
        (Some(name), Some(t)) => Some((name.clone(), t)),
        (None, None) => None,
        _ => return Err(ServiceError::BadRequest("journal and replay disagree on the tagger".into())),
    };
    let spec = SessionSpec { knowledge, model: model.clone(), tagger, config: config.clone() };
    let mut live = LiveSession::new(id.clone(), spec, None)?;
    for (n, entry) in entries.iter().enumerate().skip(1) {
        let diverged = || ServiceError::BadRequest(format!("journal entry {}: replay diverges", n + 1));
        match entry {
            JournalEntry::Event { event, result, .. } => {
                if &live.push(event)? != result {
                    return Err(diverged());
                }
            }
            JournalEntry::Finalized { summary, .. } => {
                if &live.finalize()? != summary {
                    return Err(diverged());
                }
            }
            JournalEntry::Created { .. } => return Err(diverged()),
        }
    }
    Ok(live)
}
