//! Constraint-aware simulation of interleaved activity instances.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{
    validate_interpretation, ActivityId, Assignment, ConstraintKind, EventTypeId, Interpretation, Knowledge,
    StepType, Trace,
};

use super::SynthError;

/// Generator knobs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    /// Longest instance, in steps.
    pub max_steps: usize,
    /// Upper bound of the per-trace concurrency level, sampled in `1..=max_concurrency`.
    pub max_concurrency: usize,
    /// Whole-trace attempts before giving up.
    pub retry_budget: usize,
    /// Backtracking nodes per attempt, per event of the target length.
    pub nodes_per_event: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { max_steps: 5, max_concurrency: 3, retry_budget: 10_000, nodes_per_event: 20 }
    }
}

/// Instance lengths an activity can produce under the mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActivityShape {
    pub min_steps: usize,
    pub max_steps: usize,
}

/// Event types that realise each `(activity, step)`, indexed `[activity][step]`.
struct Emitters(Vec<[Vec<EventTypeId>; 4]>);

fn step_slot(s: StepType) -> usize {
    match s {
        StepType::First => 0,
        StepType::Intermediate => 1,
        StepType::Last => 2,
        StepType::FirstAndLast => 3,
    }
}

impl Emitters {
    fn new(k: &Knowledge) -> Self {
        let mut v: Vec<[Vec<EventTypeId>; 4]> = vec![Default::default(); k.activity_count()];
        for &(e, a, s) in k.mapping.triples() {
            v[a.index()][step_slot(s)].push(e);
        }
        Emitters(v)
    }

    fn can(&self, a: usize, s: StepType) -> bool {
        !self.0[a][step_slot(s)].is_empty()
    }

    fn shape(&self, a: usize, max_steps: usize) -> Option<ActivityShape> {
        let multi = self.can(a, StepType::First) && self.can(a, StepType::Last) && max_steps >= 2;
        let single = self.can(a, StepType::FirstAndLast);
        let longest = if !multi {
            1
        } else if self.can(a, StepType::Intermediate) {
            max_steps
        } else {
            2
        };
        match (single, multi) {
            (false, false) => None,
            (true, _) => Some(ActivityShape { min_steps: 1, max_steps: longest }),
            (false, true) => Some(ActivityShape { min_steps: 2, max_steps: longest }),
        }
    }
}

impl ActivityShape {
    /// Shapes per activity derived from the mapping; `None` for activities that cannot complete an instance.
    pub fn derive(k: &Knowledge, max_steps: usize) -> Vec<Option<ActivityShape>> {
        let em = Emitters::new(k);
        (0..k.activity_count()).map(|a| em.shape(a, max_steps)).collect()
    }
}

#[derive(Debug, Clone)]
struct Obligation {
    deadline: usize,
    targets: Vec<ActivityId>,
}

#[derive(Debug, Clone)]
struct SimState {
    /// Steps emitted by the open instance of each activity (at most one open instance per activity).
    open: Vec<Option<usize>>,
    started: Vec<u32>,
    last_closing: Vec<Option<usize>>,
    obligations: Vec<Obligation>,
    labels: Vec<Assignment>,
    types: Vec<EventTypeId>,
}

struct Sim<'a> {
    k: &'a Knowledge,
    emit: Emitters,
    shapes: Vec<Option<ActivityShape>>,
    len: usize,
    concurrency: usize,
    nodes: usize,
    node_budget: usize,
}

/// Generates a finalized trace of exactly `length` events and its valid interpretation.
pub fn generate_trace<R: Rng>(
    k: &Knowledge,
    length: usize,
    cfg: &GenConfig,
    rng: &mut R,
) -> Result<(Trace, Interpretation), SynthError> {
    if length == 0 {
        return Err(SynthError::Spec("trace length must be ≥ 1".into()));
    }
    let emit = Emitters::new(k);
    let shapes = (0..k.activity_count()).map(|a| emit.shape(a, cfg.max_steps)).collect();
    let mut sim = Sim { k, emit, shapes, len: length, concurrency: 1, nodes: 0, node_budget: cfg.nodes_per_event * length };
    let na = k.activity_count();
    for _ in 0..cfg.retry_budget {
        sim.concurrency = rng.gen_range(1..=cfg.max_concurrency.max(1));
        sim.nodes = 0;
        let st = SimState {
            open: vec![None; na],
            started: vec![0; na],
            last_closing: vec![None; na],
            obligations: Vec::new(),
            labels: Vec::with_capacity(length),
            types: Vec::with_capacity(length),
        };
        if let Some(done) = sim.descend(st, rng) {
            let trace = Trace::from_types("", &done.types, true);
            let interp = Interpretation(done.labels);
            if validate_interpretation(&trace, &interp, &k.mapping, &k.model).is_valid() {
                return Ok((trace, interp));
            }
        }
    }
    Err(SynthError::InfeasibleLength { length, attempts: cfg.retry_budget })
}

impl Sim<'_> {
    fn instance_limit(&self, a: usize) -> u32 {
        self.k.model.max_inst(ActivityId(a as u16)).unwrap_or(u32::MAX)
    }

    /// Candidate `(activity, step)` moves at event `idx`.
    fn moves(&self, st: &SimState, idx: usize) -> Vec<(usize, StepType)> {
        let mut out = Vec::new();
        let open_count = st.open.iter().filter(|o| o.is_some()).count();
        for a in 0..st.open.len() {
            let Some(shape) = self.shapes[a] else { continue };
            match st.open[a] {
                Some(done) => {
                    out.push((a, StepType::Last));
                    if done + 2 <= shape.max_steps && self.emit.can(a, StepType::Intermediate) {
                        out.push((a, StepType::Intermediate));
                    }
                }
                None => {
                    if st.started[a] >= self.instance_limit(a) || open_count >= self.concurrency {
                        continue;
                    }
                    let act = ActivityId(a as u16);
                    if idx == 1 && !self.k.model.is_start(act) {
                        continue;
                    }
                    if !self.opening_allowed(st, act, idx) {
                        continue;
                    }
                    if shape.max_steps >= 2 {
                        out.push((a, StepType::First));
                    }
                    if shape.min_steps == 1 {
                        out.push((a, StepType::FirstAndLast));
                    }
                }
            }
        }
        out
    }

    /// Backward-looking constraints on an opening of `b` at `idx`.
    fn opening_allowed(&self, st: &SimState, b: ActivityId, idx: usize) -> bool {
        let closed_in_window = |a: ActivityId, w: crate::model::Window| {
            st.last_closing[a.index()].is_some_and(|i| i >= w.backward_start(idx) && i < idx)
        };
        self.k.model.constraints().iter().all(|c| match c.kind {
            ConstraintKind::Not | ConstraintKind::NegPrecedence if c.rhs[0] == b => !closed_in_window(c.lhs[0], c.window),
            ConstraintKind::Precedence if c.rhs[0] == b => c.lhs.iter().any(|&a| closed_in_window(a, c.window)),
            _ => true,
        })
    }

    fn apply<R: Rng>(&self, st: &mut SimState, a: usize, s: StepType, idx: usize, rng: &mut R) {
        let act = ActivityId(a as u16);
        let instance = match st.open[a] {
            Some(_) => st.started[a],
            None => st.started[a] + 1,
        };
        if s.is_opening() {
            st.started[a] += 1;
            st.obligations.retain(|o| !o.targets.contains(&act));
        }
        st.open[a] = if s.is_closing() { None } else { Some(st.open[a].unwrap_or(0) + 1) };
        if s.is_closing() {
            st.last_closing[a] = Some(idx);
            for c in self.k.model.constraints() {
                if c.kind == ConstraintKind::Must && c.lhs[0] == act {
                    st.obligations.push(Obligation { deadline: c.window.forward_end(idx, self.len), targets: c.rhs.clone() });
                }
            }
        }
        let ets = &self.emit.0[a][step_slot(s)];
        st.types.push(*ets.choose(rng).expect("move only offered when an emitter exists"));
        st.labels.push(Assignment::new(act, s, instance));
    }

    /// Cheap necessary conditions for completing the trace from `st` after `idx` events.
    fn feasible(&self, st: &SimState, idx: usize) -> bool {
        let left = self.len - idx;
        if st.obligations.iter().any(|o| o.deadline <= idx) {
            return false;
        }
        let open = st.open.iter().filter(|o| o.is_some()).count();
        let mut need = open;
        for o in &st.obligations {
            let cheapest = o
                .targets
                .iter()
                .filter(|b| st.started[b.index()] < self.instance_limit(b.index()))
                .filter_map(|b| self.shapes[b.index()].map(|s| s.min_steps))
                .min();
            match cheapest {
                Some(c) => need = need.max(open + c),
                None => return false,
            }
        }
        if need > left {
            return false;
        }
        let mut capacity = 0usize;
        for a in 0..st.open.len() {
            let Some(shape) = self.shapes[a] else { continue };
            if let Some(done) = st.open[a] {
                capacity += shape.max_steps - done;
            }
            let more = self.instance_limit(a).saturating_sub(st.started[a]) as usize;
            capacity = capacity.saturating_add(more.saturating_mul(shape.max_steps));
        }
        capacity >= left
    }

    fn descend<R: Rng>(&mut self, st: SimState, rng: &mut R) -> Option<SimState> {
        let idx = st.labels.len() + 1;
        if idx > self.len {
            return (st.open.iter().all(Option::is_none) && st.obligations.is_empty()).then_some(st);
        }
        self.nodes += 1;
        if self.nodes > self.node_budget {
            return None;
        }
        let mut moves = self.moves(&st, idx);
        moves.shuffle(rng);
        for (a, s) in moves {
            let mut next = st.clone();
            self.apply(&mut next, a, s, idx, rng);
            if !self.feasible(&next, idx) {
                continue;
            }
            if let Some(done) = self.descend(next, rng) {
                return Some(done);
            }
            if self.nodes > self.node_budget {
                return None;
            }
        }
        None
    }
}
