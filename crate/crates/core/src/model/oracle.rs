//! Direct checker for interpretations, and an exhaustive enumerator built on it.
//!
//! This is ground truth for the argumentation-based reasoner and shares no code
//! with it.

use std::collections::BTreeMap;

use super::{ActivityId, Assignment, ConstraintKind, DeclarativeModel, Interpretation, Trace, TypeLevelMapping};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViolationKind {
    /// The (event type, activity, step) triple is not in the mapping.
    Mapping,
    /// Event 1 is not an opening of instance 1 of a start activity.
    Start,
    /// Malformed instance: duplicate opening/closing, missing opening, step after closing.
    Structure,
    /// Instance number out of bounds or opened before its predecessor.
    InstanceOrder,
    Must,
    Not,
    Precedence,
    NegPrecedence,
    /// Finalized trace with an instance left open.
    Unclosed,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Violation {
    pub kind: ViolationKind,
    /// 1-based event indices involved, ascending.
    pub indices: Vec<usize>,
    /// Offending constraint (position in the model's constraint list), when applicable.
    pub constraint: Option<usize>,
}

impl Violation {
    fn new(kind: ViolationKind, mut indices: Vec<usize>, constraint: Option<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Violation { kind, indices, constraint }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    Invalid(Vec<Violation>),
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid)
    }

    pub fn violations(&self) -> &[Violation] {
        match self {
            Verdict::Valid => &[],
            Verdict::Invalid(v) => v,
        }
    }
}

/// Checks `interp` against mapping and model.
///
/// # Panics
/// If `interp` does not assign every event of `trace`.
pub fn validate_interpretation(
    trace: &Trace,
    interp: &Interpretation,
    mapping: &TypeLevelMapping,
    model: &DeclarativeModel,
) -> Verdict {
    assert_eq!(trace.len(), interp.len(), "interpretation must cover the whole trace");
    let len = trace.len();
    let mut out = Vec::new();
    let asg = |idx: usize| interp.0[idx - 1];

    for (k, e) in trace.events.iter().enumerate() {
        let x = interp.0[k];
        if !mapping.contains(e.etype, x.activity, x.step) {
            out.push(Violation::new(ViolationKind::Mapping, vec![k + 1], None));
        }
    }

    if len > 0 {
        let x = asg(1);
        if !(x.step.is_opening() && x.instance == 1 && model.is_start(x.activity)) {
            out.push(Violation::new(ViolationKind::Start, vec![1], None));
        }
    }

    // Per-instance step lists in index order.
    let mut instances: BTreeMap<(ActivityId, u32), Vec<(usize, Assignment)>> = BTreeMap::new();
    for idx in 1..=len {
        let x = asg(idx);
        instances.entry((x.activity, x.instance)).or_default().push((idx, x));
    }
    let opening_of = |a: ActivityId, j: u32| -> Option<usize> {
        instances.get(&(a, j)).and_then(|steps| steps.iter().find(|(_, x)| x.step.is_opening()).map(|(i, _)| *i))
    };

    for (&(a, j), steps) in &instances {
        let openings: Vec<usize> = steps.iter().filter(|(_, x)| x.step.is_opening()).map(|(i, _)| *i).collect();
        let closings: Vec<usize> = steps.iter().filter(|(_, x)| x.step.is_closing()).map(|(i, _)| *i).collect();
        if openings.len() > 1 {
            out.push(Violation::new(ViolationKind::Structure, openings.clone(), None));
        }
        if closings.len() > 1 {
            out.push(Violation::new(ViolationKind::Structure, closings.clone(), None));
        }
        match openings.first() {
            None => out.push(Violation::new(ViolationKind::Structure, steps.iter().map(|(i, _)| *i).collect(), None)),
            Some(&o) => {
                let early: Vec<usize> = steps.iter().map(|(i, _)| *i).filter(|&i| i < o).collect();
                if !early.is_empty() {
                    out.push(Violation::new(ViolationKind::Structure, [early, vec![o]].concat(), None));
                }
            }
        }
        if let Some(&c) = closings.first() {
            let late: Vec<usize> = steps.iter().map(|(i, _)| *i).filter(|&i| i > c).collect();
            if !late.is_empty() {
                out.push(Violation::new(ViolationKind::Structure, [late, vec![c]].concat(), None));
            }
        }
        let fal: Vec<usize> =
            steps.iter().filter(|(_, x)| x.step == super::StepType::FirstAndLast).map(|(i, _)| *i).collect();
        if !fal.is_empty() && steps.len() > 1 {
            out.push(Violation::new(ViolationKind::Structure, steps.iter().map(|(i, _)| *i).collect(), None));
        }

        if j < 1 || model.max_inst(a).is_some_and(|m| j > m) {
            out.push(Violation::new(ViolationKind::InstanceOrder, steps.iter().map(|(i, _)| *i).collect(), None));
        }
        if j > 1 {
            for &o in &openings {
                match opening_of(a, j - 1) {
                    Some(p) if p < o => {}
                    Some(p) => out.push(Violation::new(ViolationKind::InstanceOrder, vec![p, o], None)),
                    None => out.push(Violation::new(ViolationKind::InstanceOrder, vec![o], None)),
                }
            }
        }
        if trace.finalized && !openings.is_empty() && closings.is_empty() {
            out.push(Violation::new(ViolationKind::Unclosed, openings.clone(), None));
        }
    }

    let opens = |idx: usize, acts: &[ActivityId]| {
        let x = asg(idx);
        x.step.is_opening() && acts.contains(&x.activity)
    };
    let closes = |idx: usize, acts: &[ActivityId]| {
        let x = asg(idx);
        x.step.is_closing() && acts.contains(&x.activity)
    };

    for (q, c) in model.constraints().iter().enumerate() {
        match c.kind {
            ConstraintKind::Must => {
                for i in (1..=len).filter(|&i| closes(i, &c.lhs)) {
                    if !(c.window.observable(i, len) || trace.finalized) {
                        continue;
                    }
                    let end = c.window.forward_end(i, len);
                    if !(i + 1..=end).any(|m| opens(m, &c.rhs)) {
                        out.push(Violation::new(ViolationKind::Must, vec![i], Some(q)));
                    }
                }
            }
            ConstraintKind::Not | ConstraintKind::NegPrecedence => {
                let kind = if c.kind == ConstraintKind::Not { ViolationKind::Not } else { ViolationKind::NegPrecedence };
                for m in (1..=len).filter(|&m| opens(m, &c.rhs)) {
                    for i in c.window.backward_start(m)..m {
                        if closes(i, &c.lhs) {
                            out.push(Violation::new(kind, vec![i, m], Some(q)));
                        }
                    }
                }
            }
            ConstraintKind::Precedence => {
                for m in (1..=len).filter(|&m| opens(m, &c.rhs)) {
                    if !(c.window.backward_start(m)..m).any(|i| closes(i, &c.lhs)) {
                        out.push(Violation::new(ViolationKind::Precedence, vec![m], Some(q)));
                    }
                }
            }
        }
    }

    if out.is_empty() {
        Verdict::Valid
    } else {
        out.sort();
        out.dedup();
        Verdict::Invalid(out)
    }
}

/// Returned when exhaustive enumeration would visit more than the allowed number of nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("enumeration budget of {budget} nodes exceeded")]
pub struct Enumeration {
    pub budget: u64,
}

/// Every valid interpretation of `trace`, in lexicographic order of assignments.
///
/// Explores per-event `(activity, step, instance)` choices depth-first, cutting
/// a branch only when its prefix already violates a rule that no continuation
/// can repair; every complete assignment is confirmed by
/// [`validate_interpretation`].
pub fn enumerate_valid(
    trace: &Trace,
    mapping: &TypeLevelMapping,
    model: &DeclarativeModel,
    budget: u64,
) -> Result<Vec<Interpretation>, Enumeration> {
    let mut choices = Vec::with_capacity(trace.len());
    for e in &trace.events {
        let mut opts = Vec::new();
        for &(a, s) in mapping.cand_steps(e.etype).unwrap_or(&[]) {
            for j in 1..=model.instance_cap(a, e.index) {
                opts.push(Assignment::new(a, s, j));
            }
        }
        opts.sort();
        if opts.is_empty() {
            return Ok(Vec::new());
        }
        choices.push(opts);
    }
    let mut search = Enumerator { trace, mapping, model, choices, prefix: Vec::new(), out: Vec::new(), visited: 0, budget };
    search.descend()?;
    Ok(search.out)
}

struct Enumerator<'a> {
    trace: &'a Trace,
    mapping: &'a TypeLevelMapping,
    model: &'a DeclarativeModel,
    choices: Vec<Vec<Assignment>>,
    prefix: Vec<Assignment>,
    out: Vec<Interpretation>,
    visited: u64,
    budget: u64,
}

impl Enumerator<'_> {
    fn descend(&mut self) -> Result<(), Enumeration> {
        self.visited += 1;
        if self.visited > self.budget {
            return Err(Enumeration { budget: self.budget });
        }
        let c = self.prefix.len() + 1;
        if c > self.trace.len() {
            let interp = Interpretation(self.prefix.clone());
            if validate_interpretation(self.trace, &interp, self.mapping, self.model).is_valid() {
                self.out.push(interp);
            }
            return Ok(());
        }
        for k in 0..self.choices[c - 1].len() {
            let x = self.choices[c - 1][k];
            if self.prefix_ok(c, x) {
                self.prefix.push(x);
                self.descend()?;
                self.prefix.pop();
            }
        }
        Ok(())
    }

    /// False when assigning `x` to event `c` breaks a rule whatever follows.
    fn prefix_ok(&self, c: usize, x: Assignment) -> bool {
        let p = &self.prefix;
        if c == 1 && !(x.step.is_opening() && x.instance == 1 && self.model.is_start(x.activity)) {
            return false;
        }
        let same: Vec<&Assignment> = p.iter().filter(|y| y.activity == x.activity && y.instance == x.instance).collect();
        if x.step.is_opening() {
            if !same.is_empty() {
                return false;
            }
            if x.instance > 1
                && !p.iter().any(|y| y.activity == x.activity && y.instance == x.instance - 1 && y.step.is_opening())
            {
                return false;
            }
        } else if !same.iter().any(|y| y.step.is_opening()) || same.iter().any(|y| y.step.is_closing()) {
            return false;
        }
        let closes_at = |i: usize, acts: &[ActivityId]| {
            let y = if i == c { x } else { p[i - 1] };
            y.step.is_closing() && acts.contains(&y.activity)
        };
        let opens_at = |i: usize, acts: &[ActivityId]| {
            let y = if i == c { x } else { p[i - 1] };
            y.step.is_opening() && acts.contains(&y.activity)
        };
        let len = self.trace.len();
        for c_ in self.model.constraints() {
            match c_.kind {
                ConstraintKind::Not | ConstraintKind::NegPrecedence => {
                    if x.step.is_opening()
                        && c_.rhs.contains(&x.activity)
                        && (c_.window.backward_start(c)..c).any(|i| closes_at(i, &c_.lhs))
                    {
                        return false;
                    }
                }
                ConstraintKind::Precedence => {
                    if x.step.is_opening()
                        && c_.rhs.contains(&x.activity)
                        && !(c_.window.backward_start(c)..c).any(|i| closes_at(i, &c_.lhs))
                    {
                        return false;
                    }
                }
                ConstraintKind::Must => {
                    // Windows that close exactly at `c` are now fully decided.
                    if let Some(t) = c_.window.0 {
                        let t = t as usize;
                        if c > t {
                            let i = c - t;
                            if i <= len && closes_at(i, &c_.lhs) && !(i + 1..=c).any(|m| opens_at(m, &c_.rhs)) {
                                return false;
                            }
                        }
                    }
                }
            }
        }
        true
    }
}
