//! Online interpretation: tagger prediction, reasoner filtering, smoothing,
//! top-k beam restriction and framework recomputation, one event at a time.
//!
//! For every incoming event [`Analysis::process_event`]:
//! 1. snapshots the argumentation framework;
//! 2. extends it with the event, admitting every activity the mapping allows;
//! 3. asks the tagger for a distribution over activities;
//! 4. finds the activities with at least one credulously accepted reading;
//! 5. zeroes the others and smooths the rest ([`smooth_and_filter`]);
//! 6. keeps the `k` most probable and renormalizes ([`top_k`]);
//! 7. restores the snapshot;
//! 8. extends the framework again, admitting only the retained activities;
//! 9. returns the ranked [`StepResult`].
//!
//! Later queries run against the framework of step 8.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::model::{ActivityId, Event, Knowledge, TypeLevelMapping};
use crate::reasoner::{InterpArg, ReasonerError, Session};
use crate::tagger::{DecodingState, Tagger, TaggerError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Reasoner(#[from] ReasonerError),
    #[error(transparent)]
    Tagger(#[from] TaggerError),
    #[error("tagger predicts {tagger} activities but the model has {model}")]
    WidthMismatch { tagger: usize, model: usize },
    #[error("invalid pipeline config: {0}")]
    Config(String),
}

/// Which count of activities enters the smoothing denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingDenominator {
    /// All activities of the model.
    #[default]
    Universe,
    /// Only the reasoner-valid activities of the event.
    Valid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Beam width; `None` uses the largest number of activities any event type maps to.
    #[serde(default)]
    pub k: Option<usize>,
    pub gamma: f64,
    pub pseudo_count: f64,
    #[serde(default)]
    pub denominator: SmoothingDenominator,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig { k: None, gamma: 0.001, pseudo_count: 1.0, denominator: SmoothingDenominator::Universe }
    }
}

impl PipelineConfig {
    pub fn with_k(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }

    /// The beam width for `mapping`.
    pub fn resolved_k(&self, mapping: &TypeLevelMapping) -> usize {
        self.k.unwrap_or_else(|| mapping.max_degree()).max(1)
    }

    pub fn validate(&self, mapping: &TypeLevelMapping) -> Result<(), PipelineError> {
        let n = mapping.activities().len();
        if let Some(k) = self.k {
            if k == 0 || k > n {
                return Err(PipelineError::Config(format!("k = {k} outside 1..={n}")));
            }
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(PipelineError::Config("gamma must be positive".into()));
        }
        if !(self.pseudo_count > 0.0 && self.pseudo_count.is_finite()) {
            return Err(PipelineError::Config("pseudo-count must be positive".into()));
        }
        Ok(())
    }
}

/// Zeroes activities outside `valid` and maps the others to
/// `(pd[a]·N + γ) / (N + γ·m)`, with `m` = |𝒜| or |valid|. Not normalized.
pub fn smooth_and_filter(pd: &[f64], valid: &[ActivityId], cfg: &PipelineConfig) -> Vec<f64> {
    let n = cfg.pseudo_count;
    let m = match cfg.denominator {
        SmoothingDenominator::Universe => pd.len(),
        SmoothingDenominator::Valid => valid.len(),
    } as f64;
    let mut out = vec![0.0; pd.len()];
    for a in valid {
        out[a.index()] = (pd[a.index()] * n + cfg.gamma) / (n + cfg.gamma * m);
    }
    out
}

/// Keeps the `k` largest entries (ties towards the lower index), zeroes the
/// rest and renormalizes. An all-zero input stays all-zero.
pub fn top_k(v: &[f64], k: usize) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    let mut out = vec![0.0; v.len()];
    for &i in order.iter().take(k) {
        out[i] = v[i];
    }
    let sum: f64 = out.iter().sum();
    if sum > 0.0 {
        out.iter_mut().for_each(|x| *x /= sum);
    }
    out
}

/// One entry of a ranked list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ranked {
    pub activity: ActivityId,
    pub probability: f64,
}

/// The outcome of processing one event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    /// 1-based event position.
    pub index: usize,
    /// Retained activities by descending probability, ties by activity id.
    pub ranked: Vec<Ranked>,
    /// No activity survived: the prefix deviates from the model.
    pub deviation: bool,
    /// The validity check overflowed its budget; the mapping alone filtered the candidates.
    pub unresolved: bool,
    /// Activities with a credulously accepted reading before beam restriction, ascending.
    pub valid: Vec<ActivityId>,
}

impl StepResult {
    /// The most probable retained activity.
    pub fn top(&self) -> Option<ActivityId> {
        self.ranked.first().map(|r| r.activity)
    }

    pub fn support(&self) -> Vec<ActivityId> {
        let mut s: Vec<ActivityId> = self.ranked.iter().map(|r| r.activity).collect();
        s.sort_unstable();
        s
    }

    /// The full distribution over `n` activities.
    pub fn distribution(&self, n: usize) -> Vec<f64> {
        let mut d = vec![0.0; n];
        for r in &self.ranked {
            d[r.activity.index()] = r.probability;
        }
        d
    }
}

/// Anything that assigns a distribution over activities to each event of a trace.
pub trait Predictor {
    type State: Clone;
    fn activity_count(&self) -> usize;
    fn start(&self) -> Self::State;
    fn predict(&self, state: &mut Self::State, e: &Event) -> Result<Vec<f64>, TaggerError>;
}

impl Predictor for Tagger {
    type State = DecodingState;

    fn activity_count(&self) -> usize {
        Tagger::activity_count(self)
    }

    fn start(&self) -> DecodingState {
        self.init()
    }

    fn predict(&self, state: &mut DecodingState, e: &Event) -> Result<Vec<f64>, TaggerError> {
        Tagger::predict(self, state, e)
    }
}

impl<P: Predictor + ?Sized> Predictor for &P {
    type State = P::State;

    fn activity_count(&self) -> usize {
        (**self).activity_count()
    }

    fn start(&self) -> P::State {
        (**self).start()
    }

    fn predict(&self, state: &mut P::State, e: &Event) -> Result<Vec<f64>, TaggerError> {
        (**self).predict(state, e)
    }
}

impl<P: Predictor + ?Sized> Predictor for Arc<P> {
    type State = P::State;

    fn activity_count(&self) -> usize {
        (**self).activity_count()
    }

    fn start(&self) -> P::State {
        (**self).start()
    }

    fn predict(&self, state: &mut P::State, e: &Event) -> Result<Vec<f64>, TaggerError> {
        (**self).predict(state, e)
    }
}

/// Equal mass on every activity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Uniform(pub usize);

impl Predictor for Uniform {
    type State = ();

    fn activity_count(&self) -> usize {
        self.0
    }

    fn start(&self) {}

    fn predict(&self, _: &mut (), _: &Event) -> Result<Vec<f64>, TaggerError> {
        Ok(vec![1.0 / self.0 as f64; self.0])
    }
}

/// Fixed distributions by event position (1-based), e.g. one-hot ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Scripted {
    pub activities: usize,
    pub by_index: Vec<Vec<f64>>,
}

impl Scripted {
    /// All mass on the given activity at every position.
    pub fn one_hot(activities: usize, labels: &[ActivityId]) -> Self {
        let by_index = labels
            .iter()
            .map(|a| {
                let mut d = vec![0.0; activities];
                d[a.index()] = 1.0;
                d
            })
            .collect();
        Scripted { activities, by_index }
    }
}

impl Predictor for Scripted {
    type State = ();

    fn activity_count(&self) -> usize {
        self.activities
    }

    fn start(&self) {}

    fn predict(&self, _: &mut (), e: &Event) -> Result<Vec<f64>, TaggerError> {
        Ok(self.by_index.get(e.index - 1).cloned().unwrap_or_else(|| vec![1.0 / self.activities as f64; self.activities]))
    }
}

/// Per-event acceptance after finalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSummary {
    pub index: usize,
    /// Credulously accepted readings in the closed framework; empty when unresolved.
    pub accepted: Vec<InterpArg>,
    pub unresolved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub events: Vec<EventSummary>,
    /// Events whose retained activities no longer have any accepted reading.
    pub inconsistent: Vec<usize>,
}

/// A running interpretation of one trace.
pub struct Analysis<P: Predictor> {
    session: Session,
    predictor: P,
    state: P::State,
    config: PipelineConfig,
    k: usize,
    results: Vec<StepResult>,
}

impl<P: Predictor> std::fmt::Debug for Analysis<P> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Analysis").field("session", &self.session).field("k", &self.k).field("config", &self.config).finish()
    }
}

impl<P: Predictor> Analysis<P> {
    pub fn new(knowledge: Arc<Knowledge>, predictor: P, config: PipelineConfig) -> Result<Self, PipelineError> {
        Self::with_session(Session::new(knowledge), predictor, config)
    }

    /// Uses a preconfigured (empty) session, e.g. one with a custom solver budget.
    pub fn with_session(session: Session, predictor: P, config: PipelineConfig) -> Result<Self, PipelineError> {
        let mapping = &session.knowledge().mapping;
        config.validate(mapping)?;
        let model = mapping.activities().len();
        if predictor.activity_count() != model {
            return Err(PipelineError::WidthMismatch { tagger: predictor.activity_count(), model });
        }
        if !session.is_empty() {
            return Err(PipelineError::Config("session already holds events".into()));
        }
        let k = config.resolved_k(mapping);
        let state = predictor.start();
        Ok(Analysis { session, predictor, state, config, k, results: Vec::new() })
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn session_mut(&mut self) -> &mut Session {
        &mut self.session
    }

    pub fn predictor(&self) -> &P {
        &self.predictor
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    /// The beam width in use.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn results(&self) -> &[StepResult] {
        &self.results
    }

    /// Processes the next event. On error the analysis is left unchanged.
    pub fn process_event(&mut self, e: &Event) -> Result<StepResult, PipelineError> {
        let snapshot = self.session.get_aaf();
        let mut state = self.state.clone();
        match self.step(e, &mut state) {
            Ok(r) => {
                self.state = state;
                self.results.push(r.clone());
                Ok(r)
            }
            Err(err) => {
                self.session.set_aaf(&snapshot)?;
                Err(err)
            }
        }
    }

    fn step(&mut self, e: &Event, state: &mut P::State) -> Result<StepResult, PipelineError> {
        let k = &self.session.knowledge().clone();
        let snapshot = self.session.get_aaf();
        let cand = k.mapping.cand_act(e.etype).map_err(ReasonerError::from)?;
        self.session.update_aaf(e, &cand)?;
        let pd = self.predictor.predict(state, e)?;
        let (valid, unresolved) = match self.session.valid_activities(e.index) {
            Ok(v) => (v, false),
            Err(err) if err.is_overflow() => {
                let mut v: Vec<ActivityId> = self.session.readings(e.index).map(|x| x.activity).collect();
                v.dedup();
                (v, true)
            }
            Err(err) => return Err(err.into()),
        };
        let dist = top_k(&smooth_and_filter(&pd, &valid, &self.config), self.k);
        let mut ranked: Vec<Ranked> = dist
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(a, &p)| Ranked { activity: ActivityId(a as u16), probability: p })
            .collect();
        ranked.sort_by(|x, y| y.probability.total_cmp(&x.probability).then(x.activity.cmp(&y.activity)));
        self.session.set_aaf(&snapshot)?;
        let support: Vec<ActivityId> = {
            let mut s: Vec<ActivityId> = ranked.iter().map(|r| r.activity).collect();
            s.sort_unstable();
            s
        };
        self.session.update_aaf(e, &support)?;
        Ok(StepResult { index: e.index, deviation: ranked.is_empty(), ranked, unresolved, valid })
    }

    /// Closes the trace and reports which readings survive.
    pub fn finalize(&mut self) -> Result<Summary, PipelineError> {
        self.session.finalize()?;
        let mut events = Vec::with_capacity(self.results.len());
        let mut inconsistent = Vec::new();
        for r in &self.results {
            let (accepted, unresolved) = match self.session.accepted(r.index) {
                Ok(v) => (v, false),
                Err(err) if err.is_overflow() => (Vec::new(), true),
                Err(err) => return Err(err.into()),
            };
            if !unresolved && !r.ranked.is_empty() && accepted.is_empty() {
                inconsistent.push(r.index);
            }
            events.push(EventSummary { index: r.index, accepted, unresolved });
        }
        Ok(Summary { events, inconsistent })
    }
}

/// Runs the pipeline over a whole trace, taking all tagger predictions first.
pub fn analyze_trace<P: Predictor>(
    knowledge: Arc<Knowledge>,
    predictor: &P,
    events: &[Event],
    config: &PipelineConfig,
) -> Result<Vec<StepResult>, PipelineError> {
    let mut state = predictor.start();
    let predictions: Vec<Vec<f64>> = events.iter().map(|e| predictor.predict(&mut state, e)).collect::<Result<_, _>>()?;
    let replay = Scripted { activities: predictor.activity_count(), by_index: predictions };
    let mut an = Analysis::new(knowledge, replay, config.clone())?;
    events.iter().map(|e| an.process_event(e)).collect()
}

#[cfg(test)]
mod tests;
