//! JSON shapes of the session API. Ids never cross the wire: activities and
//! event types travel by name and resolve against the session's model.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{AttrValue, Event, Knowledge, StepType};
use crate::pipeline::{PipelineConfig, SmoothingDenominator, StepResult, Summary};
use crate::reasoner::{ActivityExplanation, Answer, ConflictCause, InterpArg, Query, Reason, Semantics};

use super::ServiceError;

pub const API_VERSION: u32 = 1;

fn v1() -> u32 {
    API_VERSION
}

/// Requests may omit `v`; any value other than the current one is rejected.
pub fn check_version(v: u32) -> Result<(), ServiceError> {
    if v != API_VERSION {
        return Err(ServiceError::BadRequest(format!("unsupported schema version {v}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApiEvent {
    #[serde(rename = "type")]
    pub etype: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attrs: BTreeMap<String, AttrValue>,
    /// Position in the trace; optional on input, where it must be the next one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
}

impl ApiEvent {
    pub fn from_event(k: &Knowledge, e: &Event) -> Self {
        ApiEvent {
            etype: k.mapping.event_type_name(e.etype).to_string(),
            attrs: e.attrs.iter().cloned().collect(),
            index: Some(e.index),
        }
    }

    pub fn to_event(&self, k: &Knowledge, next: usize) -> Result<Event, ServiceError> {
        if let Some(i) = self.index.filter(|&i| i != next) {
            return Err(ServiceError::BadRequest(format!("event index {i}, expected {next}")));
        }
        let etype = k.mapping.event_type(&self.etype).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        Ok(Event { index: next, etype, attrs: self.attrs.iter().map(|(k, v)| (k.clone(), v.clone())).collect() })
    }
}

/// Session settings; every field falls back to the library default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApiConfig {
    /// Beam width; absent means the mapping's maximum degree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pseudo_count: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub denominator: Option<SmoothingDenominator>,
    /// Solver budget (decisions plus conflicts) per reasoner query.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
}

impl ApiConfig {
    pub fn pipeline(&self) -> PipelineConfig {
        let d = PipelineConfig::default();
        PipelineConfig {
            k: self.k,
            gamma: self.gamma.unwrap_or(d.gamma),
            pseudo_count: self.pseudo_count.unwrap_or(d.pseudo_count),
            denominator: self.denominator.unwrap_or(d.denominator),
        }
    }
}

/// `model` is an inline model document or the name of a file in the model
/// directory; `tagger` names a file in the tagger directory, and a session
/// without one ranks valid activities uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    #[serde(default = "v1")]
    pub v: u32,
    pub model: serde_json::Value,
    #[serde(default)]
    pub tagger: Option<String>,
    #[serde(default)]
    pub config: ApiConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Created {
    pub v: u32,
    pub id: String,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostEvent {
    #[serde(default = "v1")]
    pub v: u32,
    pub event: ApiEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiRanked {
    pub activity: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiStep {
    pub v: u32,
    pub index: usize,
    pub event_type: String,
    /// Most probable first; empty when the event deviates from the model.
    pub ranked: Vec<ApiRanked>,
    pub top: Option<String>,
    pub deviation: bool,
    pub unresolved: bool,
    pub valid: Vec<String>,
}

impl ApiStep {
    pub fn new(k: &Knowledge, e: &Event, r: &StepResult) -> Self {
        let name = |a| k.mapping.activity_name(a).to_string();
        ApiStep {
            v: API_VERSION,
            index: r.index,
            event_type: k.mapping.event_type_name(e.etype).to_string(),
            ranked: r.ranked.iter().map(|x| ApiRanked { activity: name(x.activity), probability: x.probability }).collect(),
            top: r.top().map(name),
            deviation: r.deviation,
            unresolved: r.unresolved,
            valid: r.valid.iter().map(|&a| name(a)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiReading {
    pub index: usize,
    pub activity: String,
    pub step: StepType,
    pub instance: u32,
}

impl ApiReading {
    pub fn new(k: &Knowledge, x: &InterpArg) -> Self {
        ApiReading { index: x.index, activity: k.mapping.activity_name(x.activity).to_string(), step: x.step, instance: x.instance }
    }
}

/// Interpretation query; `step` and `instance` may be left open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApiQuery {
    #[serde(default = "v1")]
    pub v: u32,
    pub index: usize,
    pub activity: String,
    #[serde(default)]
    pub step: Option<StepType>,
    #[serde(default)]
    pub instance: Option<u32>,
    #[serde(default)]
    pub semantics: Semantics,
}

impl ApiQuery {
    pub fn resolve(&self, k: &Knowledge) -> Result<Query, ServiceError> {
        check_version(self.v)?;
        let activity = k.mapping.activity(&self.activity).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        Ok(Query { index: self.index, activity, step: self.step, instance: self.instance, semantics: self.semantics })
    }
}

/// `verdict` for fully specified queries, `readings` for open ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiAnswer {
    pub v: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readings: Option<Vec<ApiReading>>,
}

impl ApiAnswer {
    pub fn new(k: &Knowledge, a: &Answer) -> Self {
        match a {
            Answer::Verdict(b) => ApiAnswer { v: API_VERSION, verdict: Some(*b), readings: None },
            Answer::Readings(xs) => {
                ApiAnswer { v: API_VERSION, verdict: None, readings: Some(xs.iter().map(|x| ApiReading::new(k, x)).collect()) }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ApiReason {
    MappingViolation,
    StartViolation,
    InstanceLimit { cap: u32 },
    NotCandidate,
    Conflict { with: ApiReading, cause: ApiConflictCause },
    NeighborUninterpretable { index: usize },
    NotStarted,
    NotEnoughExecutions,
    NotEnded,
    MustUnmet { constraint: usize, index: usize },
    PrecedenceUnmet { constraint: usize, index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "cause", rename_all = "snake_case")]
pub enum ApiConflictCause {
    SameEvent,
    DuplicateOpening,
    DuplicateClosing,
    StepAfterClosing,
    NotConstraint { constraint: usize },
    NegPrecedence { constraint: usize },
}

impl From<ConflictCause> for ApiConflictCause {
    fn from(c: ConflictCause) -> Self {
        match c {
            ConflictCause::SameEvent => ApiConflictCause::SameEvent,
            ConflictCause::DuplicateOpening => ApiConflictCause::DuplicateOpening,
            ConflictCause::DuplicateClosing => ApiConflictCause::DuplicateClosing,
            ConflictCause::StepAfterClosing => ApiConflictCause::StepAfterClosing,
            ConflictCause::NotConstraint { constraint } => ApiConflictCause::NotConstraint { constraint },
            ConflictCause::NegPrecedence { constraint } => ApiConflictCause::NegPrecedence { constraint },
        }
    }
}

impl ApiReason {
    pub fn new(k: &Knowledge, r: &Reason) -> Self {
        match r {
            Reason::MappingViolation => ApiReason::MappingViolation,
            Reason::StartViolation => ApiReason::StartViolation,
            Reason::InstanceLimit { cap } => ApiReason::InstanceLimit { cap: *cap },
            Reason::NotCandidate => ApiReason::NotCandidate,
            Reason::Conflict { with, cause } => ApiReason::Conflict { with: ApiReading::new(k, with), cause: (*cause).into() },
            Reason::NeighborUninterpretable { index } => ApiReason::NeighborUninterpretable { index: *index },
            Reason::NotStarted => ApiReason::NotStarted,
            Reason::NotEnoughExecutions => ApiReason::NotEnoughExecutions,
            Reason::NotEnded => ApiReason::NotEnded,
            Reason::MustUnmet { constraint, index } => ApiReason::MustUnmet { constraint: *constraint, index: *index },
            Reason::PrecedenceUnmet { constraint, index } => {
                ApiReason::PrecedenceUnmet { constraint: *constraint, index: *index }
            }
        }
    }
}

/// Explanation request; without `step` and `instance` it covers every reading of the activity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApiExplain {
    #[serde(default = "v1")]
    pub v: u32,
    pub index: usize,
    pub activity: String,
    #[serde(default)]
    pub step: Option<StepType>,
    #[serde(default)]
    pub instance: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiReadingReasons {
    pub reading: ApiReading,
    pub reasons: Vec<ApiReason>,
}

/// Empty `reasons` and `readings` mean the reading (or some reading of the activity) is accepted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiExplanation {
    pub v: u32,
    pub accepted: bool,
    pub reasons: Vec<ApiReason>,
    pub readings: Vec<ApiReadingReasons>,
}

impl ApiExplanation {
    pub fn exact(k: &Knowledge, reasons: &[Reason]) -> Self {
        ApiExplanation {
            v: API_VERSION,
            accepted: reasons.is_empty(),
            reasons: reasons.iter().map(|r| ApiReason::new(k, r)).collect(),
            readings: Vec::new(),
        }
    }

    pub fn activity(k: &Knowledge, x: &ActivityExplanation) -> Self {
        ApiExplanation {
            v: API_VERSION,
            accepted: x.is_empty(),
            reasons: x.reasons.iter().map(|r| ApiReason::new(k, r)).collect(),
            readings: x
                .readings
                .iter()
                .map(|(reading, rs)| ApiReadingReasons {
                    reading: ApiReading::new(k, reading),
                    reasons: rs.iter().map(|r| ApiReason::new(k, r)).collect(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiEventSummary {
    pub index: usize,
    pub accepted: Vec<ApiReading>,
    pub unresolved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiSummary {
    pub v: u32,
    pub events: Vec<ApiEventSummary>,
    pub inconsistent: Vec<usize>,
}

impl ApiSummary {
    pub fn new(k: &Knowledge, s: &Summary) -> Self {
        ApiSummary {
            v: API_VERSION,
            events: s
                .events
                .iter()
                .map(|e| ApiEventSummary {
                    index: e.index,
                    accepted: e.accepted.iter().map(|x| ApiReading::new(k, x)).collect(),
                    unresolved: e.unresolved,
                })
                .collect(),
            inconsistent: s.inconsistent.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiState {
    pub v: u32,
    pub id: String,
    pub model: String,
    pub tagger: Option<String>,
    pub k: usize,
    pub config: ApiConfig,
    pub created_unix_ms: u64,
    pub finalized: bool,
    pub events: Vec<ApiEvent>,
    pub results: Vec<ApiStep>,
    pub summary: Option<ApiSummary>,
}

/// Body of every error response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub v: u32,
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retry_after_secs: Option<u64>,
}
