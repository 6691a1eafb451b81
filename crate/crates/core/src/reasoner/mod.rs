//! Incremental argumentation encoding of a running trace.
//!
//! A [`Session`] owns the argumentation framework for one trace prefix. Every
//! event adds one *interpretation argument* per admissible reading
//! `(activity, step, instance)` plus *undermining arguments* that attack
//! readings which break the step structure or the process model. Admissible
//! sets of the framework, restricted to interpretation arguments, are exactly
//! the valid interpretations of the prefix, so "is this reading possible?"
//! becomes credulous acceptance.
//!
//! Encoding, for event `c`:
//! - one argument per mapped `(a, s)` among the supplied candidate activities
//!   and per instance `j ≤ min(max_inst(a), c)`; at `c = 1` only openings of
//!   instance 1 of start activities;
//! - a self-attacking `NotInterpreted(c)` attacked by every reading of `c` and
//!   attacking every reading of `c − 1` and `c + 1`, so a reading survives only
//!   if its neighbours are interpreted too;
//! - mutual attacks between readings of the same event, between two openings
//!   or two closings of one instance, and between a closing and any later step
//!   of the same instance;
//! - `NotEnoughExecutions` / `NotStarted` against openings of instance `j > 1`
//!   and non-opening steps, defeated by an earlier opening of `j − 1` / `j`;
//! - `Not` and negative-precedence constraints as mutual attacks, precedence
//!   as `PrecViol(q, c)` defeated by a closing in the window, and must
//!   constraints as `MustViol(q, i)`, instantiated only once the window is
//!   fully observed or the trace is finalized;
//! - on finalization, `NotEnded(a, j)` against every `First` of `(a, j)`,
//!   defeated by a `Last` of the same instance.
//!
//! Undermining arguments are additionally attacked by `NotInterpreted(1)`.

mod query;

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::aaf::{AafError, AdmissibleOracle, ArgId, Budget, Framework};
use crate::model::{ActivityId, ConstraintKind, Event, Knowledge, ModelError, StepType};

pub use query::{ActivityExplanation, Answer, ConflictCause, Query, Reason, Semantics};

/// Reading of event `index` as step `step` of the `instance`-th execution of `activity`.
///
/// The derived order is the canonical presentation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InterpArg {
    pub index: usize,
    pub activity: ActivityId,
    pub step: StepType,
    pub instance: u32,
}

/// Payload of a framework argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArgKind {
    Interp(InterpArg),
    NotInterpreted { index: usize },
    NotEnoughExecutions { target: InterpArg },
    NotStarted { target: InterpArg },
    NotEnded { activity: ActivityId, instance: u32 },
    MustViol { constraint: usize, index: usize },
    PrecViol { constraint: usize, index: usize },
}

impl fmt::Display for ArgKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let arg = |x: &InterpArg| format!("{},{},{},{}", x.index, x.activity.0, x.step.name(), x.instance);
        match self {
            ArgKind::Interp(x) => write!(f, "interp({})", arg(x)),
            ArgKind::NotInterpreted { index } => write!(f, "not_interpreted({index})"),
            ArgKind::NotEnoughExecutions { target } => write!(f, "not_enough_executions({})", arg(target)),
            ArgKind::NotStarted { target } => write!(f, "not_started({})", arg(target)),
            ArgKind::NotEnded { activity, instance } => write!(f, "not_ended({},{instance})", activity.0),
            ArgKind::MustViol { constraint, index } => write!(f, "must_viol({constraint},{index})"),
            ArgKind::PrecViol { constraint, index } => write!(f, "prec_viol({constraint},{index})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReasonerError {
    #[error("expected event index {expected}, got {got}")]
    IndexGap { expected: usize, got: usize },
    #[error("session is finalized")]
    Finalized,
    #[error("event index {index} outside the prefix 1..={len}")]
    EventOutOfRange { index: usize, len: usize },
    #[error("snapshot belongs to another session")]
    ForeignSnapshot,
    #[error("explanations need a fully specified reading")]
    WildcardExplain,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] AafError),
}

impl ReasonerError {
    pub fn is_overflow(&self) -> bool {
        matches!(self, ReasonerError::Solver(AafError::Overflow { .. }))
    }
}

/// Argument and attack counts by kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Census {
    pub interpretations: usize,
    pub not_interpreted: usize,
    pub not_enough_executions: usize,
    pub not_started: usize,
    pub not_ended: usize,
    pub must_violations: usize,
    pub precedence_violations: usize,
    pub pending_must: usize,
    pub attacks: usize,
}

static STAMPS: AtomicU64 = AtomicU64::new(1);

fn fresh_stamp() -> u64 {
    STAMPS.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PendingMust {
    constraint: usize,
    index: usize,
}

/// Everything a snapshot captures.
#[derive(Debug, Clone)]
struct State {
    events: Vec<Event>,
    candidates: Vec<Vec<ActivityId>>,
    f: Framework<ArgKind>,
    /// Interpretation arguments per event (position `c − 1`), canonical order.
    readings: Vec<Vec<ArgId>>,
    not_interpreted: Vec<ArgId>,
    /// Interpretation arguments per instance, in creation order.
    instances: BTreeMap<(ActivityId, u32), Vec<ArgId>>,
    pending: Vec<PendingMust>,
    finalized: bool,
    /// Unique per framework revision; equal stamps mean identical states.
    stamp: u64,
}

/// Captured framework state; restore it with [`Session::set_aaf`].
#[derive(Debug, Clone)]
pub struct Snapshot {
    lineage: u64,
    state: Arc<State>,
}

impl PartialEq for Snapshot {
    fn eq(&self, other: &Self) -> bool {
        self.lineage == other.lineage && self.state.stamp == other.state.stamp
    }
}

impl Snapshot {
    pub fn len(&self) -> usize {
        self.state.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state.events.is_empty()
    }
}

/// Memoized acceptance verdicts for one framework revision.
#[derive(Debug, Default)]
struct Cache {
    stamp: u64,
    credulous: Vec<Option<bool>>,
    /// Encoding of the current framework, kept for the learnt clauses.
    oracle: Option<AdmissibleOracle>,
}

/// The reasoner for one running trace.
pub struct Session {
    knowledge: Arc<Knowledge>,
    lineage: u64,
    state: State,
    budget: Budget,
    cache: RefCell<Cache>,
}

impl fmt::Debug for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Session").field("len", &self.len()).field("finalized", &self.state.finalized).finish()
    }
}

impl Session {
    pub fn new(knowledge: Arc<Knowledge>) -> Self {
        Session {
            knowledge,
            lineage: fresh_stamp(),
            state: State {
                events: Vec::new(),
                candidates: Vec::new(),
                f: Framework::new(),
                readings: Vec::new(),
                not_interpreted: Vec::new(),
                instances: BTreeMap::new(),
                pending: Vec::new(),
                finalized: false,
                stamp: fresh_stamp(),
            },
            budget: Budget::default(),
            cache: RefCell::new(Cache::default()),
        }
    }

    /// Per-query node budget for the admissibility search.
    pub fn with_budget(mut self, budget: Budget) -> Self {
        self.budget = budget;
        self
    }

    pub fn knowledge(&self) -> &Arc<Knowledge> {
        &self.knowledge
    }

    pub fn len(&self) -> usize {
        self.state.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state.events.is_empty()
    }

    pub fn is_finalized(&self) -> bool {
        self.state.finalized
    }

    pub fn events(&self) -> &[Event] {
        &self.state.events
    }

    /// Candidate activities supplied with event `index`.
    pub fn candidates(&self, index: usize) -> Option<&[ActivityId]> {
        index.checked_sub(1).and_then(|k| self.state.candidates.get(k)).map(Vec::as_slice)
    }

    pub fn framework(&self) -> &Framework<ArgKind> {
        &self.state.f
    }

    /// Interpretation arguments for event `index`, canonical order.
    pub fn readings(&self, index: usize) -> impl Iterator<Item = InterpArg> + '_ {
        let ids = index.checked_sub(1).and_then(|k| self.state.readings.get(k)).map(Vec::as_slice).unwrap_or(&[]);
        ids.iter().map(move |&id| self.interp(id))
    }

    fn interp(&self, id: ArgId) -> InterpArg {
        match self.state.f.tag(id) {
            ArgKind::Interp(x) => *x,
            other => unreachable!("not an interpretation argument: {other}"),
        }
    }

    pub fn census(&self) -> Census {
        let mut c = Census { attacks: self.state.f.attack_count(), pending_must: self.state.pending.len(), ..Census::default() };
        for a in self.state.f.args() {
            match self.state.f.tag(a) {
                ArgKind::Interp(_) => c.interpretations += 1,
                ArgKind::NotInterpreted { .. } => c.not_interpreted += 1,
                ArgKind::NotEnoughExecutions { .. } => c.not_enough_executions += 1,
                ArgKind::NotStarted { .. } => c.not_started += 1,
                ArgKind::NotEnded { .. } => c.not_ended += 1,
                ArgKind::MustViol { .. } => c.must_violations += 1,
                ArgKind::PrecViol { .. } => c.precedence_violations += 1,
            }
        }
        c
    }

    pub fn get_aaf(&self) -> Snapshot {
        Snapshot { lineage: self.lineage, state: Arc::new(self.state.clone()) }
    }

    pub fn set_aaf(&mut self, snap: &Snapshot) -> Result<(), ReasonerError> {
        if snap.lineage != self.lineage {
            return Err(ReasonerError::ForeignSnapshot);
        }
        self.state = (*snap.state).clone();
        Ok(())
    }

    /// Appends `e`, reading it only as one of `candidates` (further restricted by the mapping).
    pub fn update_aaf(&mut self, e: &Event, candidates: &[ActivityId]) -> Result<(), ReasonerError> {
        if self.state.finalized {
            return Err(ReasonerError::Finalized);
        }
        let c = self.len() + 1;
        if e.index != c {
            return Err(ReasonerError::IndexGap { expected: c, got: e.index });
        }
        let k = Arc::clone(&self.knowledge);
        let steps = k.mapping.cand_steps(e.etype)?;
        let mut cands = candidates.to_vec();
        cands.sort();
        cands.dedup();
        if let Some(&bad) = cands.iter().find(|a| a.index() >= k.activity_count()) {
            return Err(ModelError::UnknownActivity(bad.index()).into());
        }

        let st = &mut self.state;
        st.stamp = fresh_stamp();
        st.events.push(e.clone());
        st.candidates.push(cands.clone());

        let mut fresh: Vec<InterpArg> = Vec::new();
        for &(a, s) in steps {
            if cands.binary_search(&a).is_err() {
                continue;
            }
            if c == 1 {
                if k.model.is_start(a) && s.is_opening() {
                    fresh.push(InterpArg { index: 1, activity: a, step: s, instance: 1 });
                }
                continue;
            }
            for j in 1..=k.model.instance_cap(a, c) {
                fresh.push(InterpArg { index: c, activity: a, step: s, instance: j });
            }
        }
        fresh.sort();

        let ids: Vec<ArgId> = fresh.iter().map(|&x| st.f.add_arg(ArgKind::Interp(x))).collect();

        // Neighbour coupling.
        let ni = st.f.add_arg(ArgKind::NotInterpreted { index: c });
        st.f.add_attack(ni, ni);
        for &id in &ids {
            st.f.add_attack(id, ni);
        }
        if let Some(prev) = st.readings.last() {
            for &p in prev {
                st.f.add_attack(ni, p);
            }
            let prev_ni = st.not_interpreted[c - 2];
            for &id in &ids {
                st.f.add_attack(prev_ni, id);
            }
        }

        // Alternative readings of one event.
        for (x, &p) in ids.iter().enumerate() {
            for &q in &ids[x + 1..] {
                st.f.add_mutual(p, q);
            }
        }

        st.not_interpreted.push(ni);
        st.readings.push(ids.clone());
        let ni1 = st.not_interpreted[0];

        for (&x, &id) in fresh.iter().zip(&ids) {
            let key = (x.activity, x.instance);
            // Instance structure against earlier steps of the same instance.
            let earlier = st.instances.get(&key).cloned().unwrap_or_default();
            for &p in &earlier {
                let y = match st.f.tag(p) {
                    ArgKind::Interp(y) => *y,
                    _ => unreachable!(),
                };
                if y.index == c {
                    continue;
                }
                let clash = (y.step.is_opening() && x.step.is_opening())
                    || (y.step.is_closing() && x.step.is_closing())
                    || y.step.is_closing();
                if clash {
                    st.f.add_mutual(p, id);
                }
            }
            st.instances.entry(key).or_default().push(id);

            if x.step.is_opening() && x.instance > 1 {
                let u = st.f.add_arg(ArgKind::NotEnoughExecutions { target: x });
                st.f.add_attack(u, id);
                st.f.add_attack(ni1, u);
                for &p in st.instances.get(&(x.activity, x.instance - 1)).map(Vec::as_slice).unwrap_or(&[]) {
                    if let ArgKind::Interp(y) = st.f.tag(p) {
                        if y.index < c && y.step.is_opening() {
                            st.f.add_attack(p, u);
                        }
                    }
                }
            }
            if !x.step.is_opening() {
                let u = st.f.add_arg(ArgKind::NotStarted { target: x });
                st.f.add_attack(u, id);
                st.f.add_attack(ni1, u);
                for &p in &earlier {
                    if let ArgKind::Interp(y) = st.f.tag(p) {
                        if y.index < c && y.step.is_opening() {
                            st.f.add_attack(p, u);
                        }
                    }
                }
            }
        }

        for (q, con) in k.model.constraints().iter().enumerate() {
            match con.kind {
                ConstraintKind::Not | ConstraintKind::NegPrecedence => {
                    // Closing of lhs within T steps before an opening of rhs.
                    let (a, b) = (con.lhs[0], con.rhs[0]);
                    let from = con.window.backward_start(c);
                    for (&x, &id) in fresh.iter().zip(&ids) {
                        if x.activity != b || !x.step.is_opening() {
                            continue;
                        }
                        for m in from..c {
                            for &p in &st.readings[m - 1] {
                                if let ArgKind::Interp(y) = st.f.tag(p) {
                                    if y.activity == a && y.step.is_closing() {
                                        st.f.add_mutual(p, id);
                                    }
                                }
                            }
                        }
                    }
                }
                ConstraintKind::Precedence => {
                    let b = con.rhs[0];
                    let targets: Vec<ArgId> = fresh
                        .iter()
                        .zip(&ids)
                        .filter(|(x, _)| x.activity == b && x.step.is_opening())
                        .map(|(_, &id)| id)
                        .collect();
                    if targets.is_empty() {
                        continue;
                    }
                    let u = st.f.add_arg(ArgKind::PrecViol { constraint: q, index: c });
                    for &t in &targets {
                        st.f.add_attack(u, t);
                    }
                    st.f.add_attack(ni1, u);
                    for m in con.window.backward_start(c)..c {
                        for &p in &st.readings[m - 1] {
                            if let ArgKind::Interp(y) = st.f.tag(p) {
                                if con.lhs.contains(&y.activity) && y.step.is_closing() {
                                    st.f.add_attack(p, u);
                                }
                            }
                        }
                    }
                }
                ConstraintKind::Must => {
                    if fresh.iter().any(|x| x.activity == con.lhs[0] && x.step.is_closing()) {
                        st.pending.push(PendingMust { constraint: q, index: c });
                    }
                }
            }
        }

        // Must windows that became fully observable with this event.
        let due: Vec<PendingMust> = {
            let cons = k.model.constraints();
            let (due, keep): (Vec<_>, Vec<_>) =
                st.pending.iter().partition(|p| cons[p.constraint].window.observable(p.index, c));
            st.pending = keep;
            due
        };
        for p in due {
            instantiate_must(st, &k, p, c);
        }
        Ok(())
    }

    /// Marks the trace as complete: open instances become violations and
    /// pending must-constraints are decided on the truncated window.
    pub fn finalize(&mut self) -> Result<(), ReasonerError> {
        if self.state.finalized {
            return Err(ReasonerError::Finalized);
        }
        let k = Arc::clone(&self.knowledge);
        let st = &mut self.state;
        st.stamp = fresh_stamp();
        st.finalized = true;
        let len = st.events.len();
        for p in std::mem::take(&mut st.pending) {
            instantiate_must(st, &k, p, len);
        }
        if len == 0 {
            return Ok(());
        }
        let ni1 = st.not_interpreted[0];
        let instances: Vec<((ActivityId, u32), Vec<ArgId>)> =
            st.instances.iter().map(|(k, v)| (*k, v.clone())).collect();
        for ((a, j), args) in instances {
            let step_of = |id: ArgId, f: &Framework<ArgKind>| match f.tag(id) {
                ArgKind::Interp(x) => x.step,
                _ => unreachable!(),
            };
            let firsts: Vec<ArgId> = args.iter().copied().filter(|&id| step_of(id, &st.f) == StepType::First).collect();
            if firsts.is_empty() {
                continue;
            }
            let u = st.f.add_arg(ArgKind::NotEnded { activity: a, instance: j });
            for &t in &firsts {
                st.f.add_attack(u, t);
            }
            st.f.add_attack(ni1, u);
            for &id in &args {
                if step_of(id, &st.f) == StepType::Last {
                    st.f.add_attack(id, u);
                }
            }
        }
        Ok(())
    }
}

/// Adds `MustViol(q, i)` against the closings at `i`, defeated by openings of
/// any target activity in `(i, min(i + T, end)]`.
fn instantiate_must(st: &mut State, k: &Knowledge, p: PendingMust, end: usize) {
    let con = &k.model.constraints()[p.constraint];
    let closings: Vec<ArgId> = st.readings[p.index - 1]
        .iter()
        .copied()
        .filter(|&id| matches!(st.f.tag(id), ArgKind::Interp(x) if x.activity == con.lhs[0] && x.step.is_closing()))
        .collect();
    let u = st.f.add_arg(ArgKind::MustViol { constraint: p.constraint, index: p.index });
    for &t in &closings {
        st.f.add_attack(u, t);
    }
    st.f.add_attack(st.not_interpreted[0], u);
    for m in p.index + 1..=con.window.forward_end(p.index, end) {
        for &id in &st.readings[m - 1] {
            if let ArgKind::Interp(y) = st.f.tag(id) {
                if con.rhs.contains(&y.activity) && y.step.is_opening() {
                    st.f.add_attack(id, u);
                }
            }
        }
    }
}
