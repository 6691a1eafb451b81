//! Interpretation queries and explanations.

use serde::{Deserialize, Serialize};

use super::{ArgKind, InterpArg, ReasonerError, Session};
use crate::aaf::{AdmissibleOracle, AdmissibleSearch, ArgId};
use crate::model::{ActivityId, ConstraintKind, StepType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Semantics {
    #[default]
    Credulous,
    Skeptical,
}

/// "Can event `index` be read as (`activity`, `step`, `instance`)?" — `None` is a wildcard.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Query {
    pub index: usize,
    pub activity: ActivityId,
    pub step: Option<StepType>,
    pub instance: Option<u32>,
    pub semantics: Semantics,
}

impl Query {
    pub fn exact(index: usize, activity: ActivityId, step: StepType, instance: u32) -> Self {
        Query { index, activity, step: Some(step), instance: Some(instance), semantics: Semantics::Credulous }
    }

    pub fn any(index: usize, activity: ActivityId) -> Self {
        Query { index, activity, step: None, instance: None, semantics: Semantics::Credulous }
    }

    pub fn skeptical(mut self) -> Self {
        self.semantics = Semantics::Skeptical;
        self
    }

    pub fn is_exact(&self) -> bool {
        self.step.is_some() && self.instance.is_some()
    }

    fn matches(&self, x: &InterpArg) -> bool {
        x.activity == self.activity
            && self.step.is_none_or(|s| s == x.step)
            && self.instance.is_none_or(|j| j == x.instance)
    }
}

/// Result of [`Session::answer`]: a verdict for exact queries, the accepted readings otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum Answer {
    Verdict(bool),
    Readings(Vec<InterpArg>),
}

/// Why two readings cannot both hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "cause", rename_all = "snake_case")]
pub enum ConflictCause {
    /// Alternative readings of the same event.
    SameEvent,
    /// Two openings of one instance.
    DuplicateOpening,
    /// Two closings of one instance.
    DuplicateClosing,
    /// A step of an instance after its closing.
    StepAfterClosing,
    /// A `Not` constraint forbids the later opening.
    NotConstraint { constraint: usize },
    /// A negative-precedence constraint forbids the later opening.
    NegPrecedence { constraint: usize },
}

/// One reason a reading is not a valid interpretation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reason {
    /// The mapping does not allow the event type as this step of this activity.
    MappingViolation,
    /// The first event must open instance 1 of a start activity.
    StartViolation,
    /// The instance number exceeds what the model or the position allows.
    InstanceLimit { cap: u32 },
    /// The activity was not among the candidates supplied for the event.
    NotCandidate,
    /// Incompatible with another reading that cannot be ruled out.
    Conflict { with: InterpArg, cause: ConflictCause },
    /// A neighbouring event has no reading compatible with this one.
    NeighborUninterpretable { index: usize },
    /// No earlier opening of the same instance.
    NotStarted,
    /// No earlier opening of the previous instance.
    NotEnoughExecutions,
    /// The instance is never closed (finalized traces).
    NotEnded,
    /// No opening of a required activity follows the closing within the window.
    MustUnmet { constraint: usize, index: usize },
    /// No closing of a required activity precedes the opening within the window.
    PrecedenceUnmet { constraint: usize, index: usize },
}

/// Result of [`Session::explain_activity`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ActivityExplanation {
    pub reasons: Vec<Reason>,
    pub readings: Vec<(InterpArg, Vec<Reason>)>,
}

impl ActivityExplanation {
    /// Some reading of the activity is accepted.
    pub fn is_empty(&self) -> bool {
        self.reasons.is_empty() && self.readings.is_empty()
    }
}

impl Session {
    fn check_index(&self, index: usize) -> Result<(), ReasonerError> {
        if index == 0 || index > self.len() {
            return Err(ReasonerError::EventOutOfRange { index, len: self.len() });
        }
        Ok(())
    }

    fn reading_id(&self, x: &InterpArg) -> Option<ArgId> {
        self.state.readings.get(x.index.checked_sub(1)?)?.iter().copied().find(|&id| self.interp(id) == *x)
    }

    /// Credulous acceptance of one argument, memoized per framework revision.
    fn credulous(&self, id: ArgId) -> Result<bool, ReasonerError> {
        Ok(self.credulous_any(&[id])?.is_some())
    }

    /// Some credulously accepted argument among `ids`, memoized per framework revision.
    ///
    /// Every interpretation argument in a witness set is recorded as accepted,
    /// and the search is steered towards arguments whose status is unknown. A
    /// failed query marks every argument in `ids` as rejected.
    fn credulous_any(&self, ids: &[ArgId]) -> Result<Option<ArgId>, ReasonerError> {
        let mut cache = self.cache.borrow_mut();
        let cache = &mut *cache;
        if cache.stamp != self.state.stamp || cache.credulous.len() != self.state.f.len() {
            cache.stamp = self.state.stamp;
            cache.credulous = vec![None; self.state.f.len()];
            cache.oracle = None;
        }
        if let Some(&hit) = ids.iter().find(|id| cache.credulous[id.index()] == Some(true)) {
            return Ok(Some(hit));
        }
        let open: Vec<ArgId> = ids.iter().copied().filter(|id| cache.credulous[id.index()].is_none()).collect();
        if open.is_empty() {
            return Ok(None);
        }
        let unknown: Vec<bool> = cache.credulous.iter().map(Option::is_none).collect();
        let oracle = cache.oracle.get_or_insert_with(|| AdmissibleOracle::new(&self.state.f).budget(self.budget));
        let found = if let [one] = open[..] { oracle.find(&[one], &[], Some(&unknown))? } else { oracle.find_any(&open, Some(&unknown))? };
        match found {
            Some(set) => {
                for &a in &set {
                    if matches!(self.state.f.tag(a), ArgKind::Interp(_)) {
                        cache.credulous[a.index()] = Some(true);
                    }
                }
                Ok(open.into_iter().find(|id| set.binary_search(id).is_ok()))
            }
            None => {
                for id in open {
                    cache.credulous[id.index()] = Some(false);
                }
                Ok(None)
            }
        }
    }

    /// Readings of one event belong to every non-empty admissible set exactly once,
    /// so a reading is skeptically accepted iff it is the only credulous one.
    fn skeptical(&self, id: ArgId, index: usize) -> Result<bool, ReasonerError> {
        if !self.credulous(id)? {
            return Ok(false);
        }
        for &other in &self.state.readings[index - 1] {
            if other != id && self.credulous(other)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn accepts(&self, id: ArgId, index: usize, semantics: Semantics) -> Result<bool, ReasonerError> {
        match semantics {
            Semantics::Credulous => self.credulous(id),
            Semantics::Skeptical => self.skeptical(id, index),
        }
    }

    pub fn answer(&self, q: &Query) -> Result<Answer, ReasonerError> {
        self.check_index(q.index)?;
        if let (Some(step), Some(instance)) = (q.step, q.instance) {
            let x = InterpArg { index: q.index, activity: q.activity, step, instance };
            return match self.reading_id(&x) {
                Some(id) => Ok(Answer::Verdict(self.accepts(id, q.index, q.semantics)?)),
                None => Ok(Answer::Verdict(false)),
            };
        }
        let mut out = Vec::new();
        for &id in &self.state.readings[q.index - 1] {
            let x = self.interp(id);
            if q.matches(&x) && self.accepts(id, q.index, q.semantics)? {
                out.push(x);
            }
        }
        Ok(Answer::Readings(out))
    }

    /// All credulously accepted readings of event `index`, canonical order.
    pub fn accepted(&self, index: usize) -> Result<Vec<InterpArg>, ReasonerError> {
        self.check_index(index)?;
        let mut out = Vec::new();
        for &id in &self.state.readings[index - 1] {
            if self.credulous(id)? {
                out.push(self.interp(id));
            }
        }
        Ok(out)
    }

    /// Activities with at least one credulously accepted reading of event `index`, ascending.
    pub fn valid_activities(&self, index: usize) -> Result<Vec<ActivityId>, ReasonerError> {
        self.check_index(index)?;
        let readings = &self.state.readings[index - 1];
        let mut out: Vec<ActivityId> = Vec::new();
        let mut k = 0;
        while k < readings.len() {
            let a = self.interp(readings[k]).activity;
            let end = k + readings[k..].iter().take_while(|&&id| self.interp(id).activity == a).count();
            if self.credulous_any(&readings[k..end])?.is_some() {
                out.push(a);
            }
            k = end;
        }
        Ok(out)
    }

    /// Why the exact reading `q` is not credulously accepted; empty if it is.
    ///
    /// For readings that exist in the framework, the reasons are a minimal set
    /// of attackers whose attacks, if lifted, would make the reading acceptable
    /// (greedy deletion in canonical attacker order, so the result is
    /// deterministic).
    pub fn explain(&self, q: &Query) -> Result<Vec<Reason>, ReasonerError> {
        self.check_index(q.index)?;
        let (Some(step), Some(instance)) = (q.step, q.instance) else {
            return Err(ReasonerError::WildcardExplain);
        };
        let x = InterpArg { index: q.index, activity: q.activity, step, instance };
        let Some(id) = self.reading_id(&x) else {
            return Ok(self.static_reasons(&x));
        };
        if self.credulous(id)? {
            return Ok(Vec::new());
        }
        let f = &self.state.f;
        let mut culprits: Vec<ArgId> = f.attackers_of(id).to_vec();
        culprits.sort_by_key(|&b| (*f.tag(b), b));
        let lifted = |keep: &[ArgId]| -> Result<bool, ReasonerError> {
            let mut g = f.clone();
            for &b in keep {
                g.remove_attack(b, id);
            }
            Ok(AdmissibleSearch::new(&g).require([id]).budget(self.budget).run()?.is_some())
        };
        let mut k = 0;
        while k < culprits.len() {
            let mut without = culprits.clone();
            without.remove(k);
            if lifted(&without)? {
                culprits = without;
            } else {
                k += 1;
            }
        }
        Ok(culprits.into_iter().map(|b| self.render(&x, b)).collect())
    }

    /// Why no reading of `activity` is credulously accepted at event `index`.
    ///
    /// Activity-level reasons (the mapping never produces the event type from
    /// the activity, or the activity was not a candidate) come first; after
    /// them, every reading of the activity present in the framework with its
    /// own explanation. Both parts are empty if some reading is accepted.
    pub fn explain_activity(&self, index: usize, activity: ActivityId) -> Result<ActivityExplanation, ReasonerError> {
        self.check_index(index)?;
        let mut out = ActivityExplanation::default();
        let e = &self.state.events[index - 1];
        let mapped = self.knowledge.mapping.cand_steps(e.etype).is_ok_and(|cs| cs.iter().any(|&(a, _)| a == activity));
        if !mapped {
            out.reasons.push(Reason::MappingViolation);
            return Ok(out);
        }
        if self.state.candidates[index - 1].binary_search(&activity).is_err() {
            out.reasons.push(Reason::NotCandidate);
            return Ok(out);
        }
        for &id in &self.state.readings[index - 1] {
            let x = self.interp(id);
            if x.activity != activity {
                continue;
            }
            let reasons = self.explain(&Query::exact(index, activity, x.step, x.instance))?;
            if reasons.is_empty() {
                return Ok(ActivityExplanation::default());
            }
            out.readings.push((x, reasons));
        }
        Ok(out)
    }

    fn static_reasons(&self, x: &InterpArg) -> Vec<Reason> {
        let k = &self.knowledge;
        let e = &self.state.events[x.index - 1];
        let mut out = Vec::new();
        if !k.mapping.contains(e.etype, x.activity, x.step) {
            out.push(Reason::MappingViolation);
        }
        if x.index == 1 && !(k.model.is_start(x.activity) && x.step.is_opening() && x.instance == 1) {
            out.push(Reason::StartViolation);
        }
        let cap = if x.activity.index() < k.activity_count() { k.model.instance_cap(x.activity, x.index) } else { 0 };
        if x.instance == 0 || x.instance > cap {
            out.push(Reason::InstanceLimit { cap });
        }
        // Only meaningful when the mapping itself would allow the activity.
        let mapped = k.mapping.cand_steps(e.etype).is_ok_and(|cs| cs.iter().any(|&(a, _)| a == x.activity));
        if mapped && self.state.candidates[x.index - 1].binary_search(&x.activity).is_err() {
            out.push(Reason::NotCandidate);
        }
        out
    }

    fn render(&self, x: &InterpArg, culprit: ArgId) -> Reason {
        match *self.state.f.tag(culprit) {
            ArgKind::Interp(y) => Reason::Conflict { with: y, cause: self.conflict_cause(x, &y) },
            ArgKind::NotInterpreted { index } => Reason::NeighborUninterpretable { index },
            ArgKind::NotEnoughExecutions { .. } => Reason::NotEnoughExecutions,
            ArgKind::NotStarted { .. } => Reason::NotStarted,
            ArgKind::NotEnded { .. } => Reason::NotEnded,
            ArgKind::MustViol { constraint, index } => Reason::MustUnmet { constraint, index },
            ArgKind::PrecViol { constraint, index } => Reason::PrecedenceUnmet { constraint, index },
        }
    }

    fn conflict_cause(&self, x: &InterpArg, y: &InterpArg) -> ConflictCause {
        if x.index == y.index {
            return ConflictCause::SameEvent;
        }
        let (early, late) = if x.index < y.index { (x, y) } else { (y, x) };
        if early.activity == late.activity && early.instance == late.instance {
            return if early.step.is_opening() && late.step.is_opening() {
                ConflictCause::DuplicateOpening
            } else if early.step.is_closing() && late.step.is_closing() {
                ConflictCause::DuplicateClosing
            } else {
                ConflictCause::StepAfterClosing
            };
        }
        for (q, con) in self.knowledge.model.constraints().iter().enumerate() {
            let applies = early.activity == con.lhs[0]
                && early.step.is_closing()
                && late.activity == con.rhs[0]
                && late.step.is_opening()
                && con.window.backward_start(late.index) <= early.index;
            match con.kind {
                ConstraintKind::Not if applies => return ConflictCause::NotConstraint { constraint: q },
                ConstraintKind::NegPrecedence if applies => return ConflictCause::NegPrecedence { constraint: q },
                _ => {}
            }
        }
        unreachable!("attack between {x:?} and {y:?} matches no encoding rule")
    }
}
