//! Domain vocabulary: activities, event types, life-cycle steps, the
//! type-level mapping and the declarative process model.

mod oracle;
mod schema;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use oracle::{enumerate_valid, validate_interpretation, Enumeration, Verdict, Violation, ViolationKind};
pub use schema::{parse_model, serialize_model};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("unknown event type id {0}")]
    UnknownEventType(usize),
    #[error("unknown activity id {0}")]
    UnknownActivity(usize),
    #[error("unknown event type `{0}`")]
    UnknownEventTypeName(String),
    #[error("unknown activity `{0}`")]
    UnknownActivityName(String),
    #[error("{locus}: {message}")]
    Parse { locus: String, message: String },
}

impl ModelError {
    pub(crate) fn parse(locus: impl Into<String>, message: impl Into<String>) -> Self {
        ModelError::Parse { locus: locus.into(), message: message.into() }
    }
}

/// Position of an event within an activity instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepType {
    First,
    Intermediate,
    Last,
    FirstAndLast,
}

impl StepType {
    pub const ALL: [StepType; 4] = [StepType::First, StepType::Intermediate, StepType::Last, StepType::FirstAndLast];

    pub fn is_opening(self) -> bool {
        matches!(self, StepType::First | StepType::FirstAndLast)
    }

    pub fn is_closing(self) -> bool {
        matches!(self, StepType::Last | StepType::FirstAndLast)
    }

    pub fn name(self) -> &'static str {
        match self {
            StepType::First => "first",
            StepType::Intermediate => "intermediate",
            StepType::Last => "last",
            StepType::FirstAndLast => "first_and_last",
        }
    }

    pub fn from_name(s: &str) -> Option<StepType> {
        match s.to_ascii_lowercase().as_str() {
            "first" => Some(StepType::First),
            "intermediate" => Some(StepType::Intermediate),
            "last" => Some(StepType::Last),
            "first_and_last" | "first&last" | "firstandlast" => Some(StepType::FirstAndLast),
            _ => None,
        }
    }
}

impl fmt::Display for StepType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ActivityId(pub u16);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EventTypeId(pub u16);

impl ActivityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl EventTypeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Dense, name-indexed set of symbols.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Universe {
    names: Vec<String>,
    index: HashMap<String, u16>,
}

impl Universe {
    /// Fails on duplicate names.
    pub fn new<I, S>(names: I) -> Result<Self, String>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut u = Universe::default();
        for n in names {
            let n = n.into();
            if u.index.contains_key(&n) {
                return Err(n);
            }
            u.index.insert(n.clone(), u.names.len() as u16);
            u.names.push(n);
        }
        Ok(u)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn lookup(&self, name: &str) -> Option<usize> {
        self.index.get(name).map(|&i| i as usize)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Num(f64),
    Cat(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    /// 1-based position in its trace.
    pub index: usize,
    pub etype: EventTypeId,
    pub attrs: Vec<(String, AttrValue)>,
}

impl Event {
    pub fn new(index: usize, etype: EventTypeId) -> Self {
        Event { index, etype, attrs: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub id: String,
    pub events: Vec<Event>,
    pub finalized: bool,
}

impl Trace {
    /// Builds a trace from event types, numbering events from 1.
    pub fn from_types(id: impl Into<String>, types: &[EventTypeId], finalized: bool) -> Self {
        let events = types.iter().enumerate().map(|(i, &t)| Event::new(i + 1, t)).collect();
        Trace { id: id.into(), events, finalized }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Relation between event types, activities and step types, with per-event-type projections.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeLevelMapping {
    activities: Universe,
    event_types: Universe,
    triples: BTreeSet<(EventTypeId, ActivityId, StepType)>,
    by_event: Vec<Vec<(ActivityId, StepType)>>,
}

impl TypeLevelMapping {
    /// Fails with the offending triple if it is duplicated or references an undeclared id.
    pub fn new(
        activities: Universe,
        event_types: Universe,
        triples: impl IntoIterator<Item = (EventTypeId, ActivityId, StepType)>,
    ) -> Result<Self, (EventTypeId, ActivityId, StepType)> {
        let mut set = BTreeSet::new();
        for t in triples {
            if t.0.index() >= event_types.len() || t.1.index() >= activities.len() || !set.insert(t) {
                return Err(t);
            }
        }
        let mut by_event = vec![Vec::new(); event_types.len()];
        for &(e, a, s) in &set {
            by_event[e.index()].push((a, s));
        }
        Ok(TypeLevelMapping { activities, event_types, triples: set, by_event })
    }

    pub fn activities(&self) -> &Universe {
        &self.activities
    }

    pub fn event_types(&self) -> &Universe {
        &self.event_types
    }

    pub fn triples(&self) -> impl Iterator<Item = &(EventTypeId, ActivityId, StepType)> {
        self.triples.iter()
    }

    pub fn contains(&self, et: EventTypeId, a: ActivityId, s: StepType) -> bool {
        self.triples.contains(&(et, a, s))
    }

    /// Activities that can generate events of type `et`, ascending.
    pub fn cand_act(&self, et: EventTypeId) -> Result<Vec<ActivityId>, ModelError> {
        let steps = self.cand_steps(et)?;
        let mut acts: Vec<ActivityId> = steps.iter().map(|&(a, _)| a).collect();
        acts.dedup();
        Ok(acts)
    }

    /// `(activity, step)` pairs for `et`, sorted by activity then step.
    pub fn cand_steps(&self, et: EventTypeId) -> Result<&[(ActivityId, StepType)], ModelError> {
        self.by_event.get(et.index()).map(Vec::as_slice).ok_or(ModelError::UnknownEventType(et.index()))
    }

    /// Maximum number of activities any event type maps to.
    pub fn max_degree(&self) -> usize {
        (0..self.event_types.len())
            .map(|e| self.cand_act(EventTypeId(e as u16)).map(|v| v.len()).unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    pub fn activity(&self, name: &str) -> Result<ActivityId, ModelError> {
        self.activities
            .lookup(name)
            .map(|i| ActivityId(i as u16))
            .ok_or_else(|| ModelError::UnknownActivityName(name.to_string()))
    }

    pub fn event_type(&self, name: &str) -> Result<EventTypeId, ModelError> {
        self.event_types
            .lookup(name)
            .map(|i| EventTypeId(i as u16))
            .ok_or_else(|| ModelError::UnknownEventTypeName(name.to_string()))
    }

    pub fn activity_name(&self, a: ActivityId) -> &str {
        self.activities.name(a.index())
    }

    pub fn event_type_name(&self, e: EventTypeId) -> &str {
        self.event_types.name(e.index())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    /// `A =>_T B1|...|Bk`
    Must,
    /// `A =>_T not B`
    Not,
    /// `A1|...|Ak <=_T B`
    Precedence,
    /// `not A <=_T B`
    NegPrecedence,
}

impl ConstraintKind {
    pub fn name(self) -> &'static str {
        match self {
            ConstraintKind::Must => "must",
            ConstraintKind::Not => "not",
            ConstraintKind::Precedence => "precedence",
            ConstraintKind::NegPrecedence => "neg_precedence",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "must" => Some(ConstraintKind::Must),
            "not" => Some(ConstraintKind::Not),
            "precedence" => Some(ConstraintKind::Precedence),
            "neg_precedence" => Some(ConstraintKind::NegPrecedence),
            _ => None,
        }
    }
}

/// Temporal window `T`; `None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Window(pub Option<u32>);

impl Window {
    pub const UNBOUNDED: Window = Window(None);

    pub fn steps(n: u32) -> Window {
        Window(Some(n))
    }

    /// Last index covered by a forward window opened at `idx`, clamped to `len`.
    pub fn forward_end(self, idx: usize, len: usize) -> usize {
        match self.0 {
            Some(t) => (idx + t as usize).min(len),
            None => len,
        }
    }

    /// First index covered by a backward window ending just before `idx` (at least 1).
    pub fn backward_start(self, idx: usize) -> usize {
        match self.0 {
            Some(t) => idx.saturating_sub(t as usize).max(1),
            None => 1,
        }
    }

    /// True when the forward window from `idx` lies entirely within a prefix of length `len`.
    pub fn observable(self, idx: usize, len: usize) -> bool {
        match self.0 {
            Some(t) => idx + t as usize <= len,
            None => false,
        }
    }
}

/// One temporal rule. For `Must`/`Not`/`NegPrecedence` the triggering activity is
/// `lhs[0]`; for `Not`/`Precedence`/`NegPrecedence` the constrained activity is `rhs[0]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Constraint {
    pub kind: ConstraintKind,
    pub lhs: Vec<ActivityId>,
    pub rhs: Vec<ActivityId>,
    pub window: Window,
}

impl Constraint {
    pub fn must(a: ActivityId, bs: &[ActivityId], window: Window) -> Self {
        Constraint { kind: ConstraintKind::Must, lhs: vec![a], rhs: bs.to_vec(), window }
    }

    pub fn not(a: ActivityId, b: ActivityId, window: Window) -> Self {
        Constraint { kind: ConstraintKind::Not, lhs: vec![a], rhs: vec![b], window }
    }

    pub fn precedence(as_: &[ActivityId], b: ActivityId, window: Window) -> Self {
        Constraint { kind: ConstraintKind::Precedence, lhs: as_.to_vec(), rhs: vec![b], window }
    }

    pub fn neg_precedence(a: ActivityId, b: ActivityId, window: Window) -> Self {
        Constraint { kind: ConstraintKind::NegPrecedence, lhs: vec![a], rhs: vec![b], window }
    }

    /// Checks the arity invariants of the constraint kind.
    pub fn check_shape(&self) -> Result<(), String> {
        if self.window.0 == Some(0) {
            return Err("window must be ≥ 1".into());
        }
        let ok = match self.kind {
            ConstraintKind::Must => self.lhs.len() == 1 && !self.rhs.is_empty(),
            ConstraintKind::Not | ConstraintKind::NegPrecedence => self.lhs.len() == 1 && self.rhs.len() == 1,
            ConstraintKind::Precedence => !self.lhs.is_empty() && self.rhs.len() == 1,
        };
        if ok {
            Ok(())
        } else {
            Err(format!("wrong arity for {} constraint", self.kind.name()))
        }
    }
}

/// Start activities, per-activity instance bounds and temporal constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct DeclarativeModel {
    start_acts: BTreeSet<ActivityId>,
    /// `None` = unbounded.
    max_inst: Vec<Option<u32>>,
    constraints: Vec<Constraint>,
}

impl DeclarativeModel {
    pub fn new(
        start_acts: impl IntoIterator<Item = ActivityId>,
        max_inst: Vec<Option<u32>>,
        constraints: Vec<Constraint>,
    ) -> Result<Self, String> {
        let start_acts: BTreeSet<_> = start_acts.into_iter().collect();
        if start_acts.is_empty() {
            return Err("start activities must be non-empty".into());
        }
        let n = max_inst.len();
        if start_acts.iter().any(|a| a.index() >= n) {
            return Err("start activity out of range".into());
        }
        if max_inst.iter().any(|m| *m == Some(0)) {
            return Err("max instances must be positive".into());
        }
        for (i, c) in constraints.iter().enumerate() {
            c.check_shape().map_err(|e| format!("constraint {i}: {e}"))?;
            if c.lhs.iter().chain(&c.rhs).any(|a| a.index() >= n) {
                return Err(format!("constraint {i}: activity out of range"));
            }
        }
        Ok(DeclarativeModel { start_acts, max_inst, constraints })
    }

    pub fn activity_count(&self) -> usize {
        self.max_inst.len()
    }

    pub fn start_acts(&self) -> &BTreeSet<ActivityId> {
        &self.start_acts
    }

    pub fn is_start(&self, a: ActivityId) -> bool {
        self.start_acts.contains(&a)
    }

    pub fn max_inst(&self, a: ActivityId) -> Option<u32> {
        self.max_inst[a.index()]
    }

    /// Largest admissible instance number for `a` at 1-based event position `idx`.
    pub fn instance_cap(&self, a: ActivityId, idx: usize) -> u32 {
        let by_pos = idx.min(u32::MAX as usize) as u32;
        self.max_inst(a).map_or(by_pos, |m| m.min(by_pos))
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }
}

/// Mapping plus process model: everything the reasoner knows about the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Knowledge {
    pub mapping: TypeLevelMapping,
    pub model: DeclarativeModel,
}

impl Knowledge {
    pub fn activity_count(&self) -> usize {
        self.mapping.activities().len()
    }
}

/// Reading of a single event: step `step` of the `instance`-th execution of `activity`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Assignment {
    pub activity: ActivityId,
    pub step: StepType,
    pub instance: u32,
}

impl Assignment {
    pub fn new(activity: ActivityId, step: StepType, instance: u32) -> Self {
        Assignment { activity, step, instance }
    }
}

/// Total per-event reading of a trace prefix; position `k` holds event `k + 1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Interpretation(pub Vec<Assignment>);

impl Interpretation {
    pub fn get(&self, idx: usize) -> Option<&Assignment> {
        idx.checked_sub(1).and_then(|k| self.0.get(k))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}
