//! Random small knowledge bases and traces for differential tests.

use procsift::model::{
    ActivityId, Constraint, DeclarativeModel, EventTypeId, Knowledge, StepType, Trace, TypeLevelMapping, Universe,
    Window,
};

use super::naive_aaf::XorShift;

fn window(rng: &mut XorShift) -> Window {
    match rng.below(5) {
        0 => Window::UNBOUNDED,
        n => Window::steps(n as u32),
    }
}

fn pick(rng: &mut XorShift, n: usize) -> ActivityId {
    ActivityId(rng.below(n as u64) as u16)
}

/// A model with 2..=`max_acts` activities and 2..=4 event types, random mapping,
/// start set, instance bounds and up to three constraints.
pub fn random_knowledge(rng: &mut XorShift, max_acts: usize) -> Knowledge {
    let na = 2 + rng.below(max_acts as u64 - 1) as usize;
    let ne = 2 + rng.below(3) as usize;
    let acts = Universe::new((0..na).map(|i| format!("a{i}"))).unwrap();
    let ets = Universe::new((0..ne).map(|i| format!("e{i}"))).unwrap();
    let mut triples = Vec::new();
    for e in 0..ne {
        // Each event type maps to at least one (activity, step).
        let mut any = false;
        for a in 0..na {
            if rng.below(100) < 45 {
                for s in StepType::ALL {
                    if rng.below(100) < 55 {
                        triples.push((EventTypeId(e as u16), ActivityId(a as u16), s));
                        any = true;
                    }
                }
            }
        }
        if !any {
            let s = StepType::ALL[rng.below(4) as usize];
            triples.push((EventTypeId(e as u16), pick(rng, na), s));
        }
    }
    let mapping = TypeLevelMapping::new(acts, ets, triples).unwrap();

    let mut start: Vec<ActivityId> = (0..na).filter(|_| rng.below(2) == 0).map(|a| ActivityId(a as u16)).collect();
    if start.is_empty() {
        start.push(pick(rng, na));
    }
    let max_inst = (0..na)
        .map(|_| match rng.below(6) {
            0 => None,
            1 | 2 => Some(2),
            3 => Some(3),
            _ => Some(1),
        })
        .collect();
    let mut constraints = Vec::new();
    for _ in 0..rng.below(4) {
        let (a, b) = (pick(rng, na), pick(rng, na));
        let w = window(rng);
        constraints.push(match rng.below(4) {
            0 => {
                let mut bs = vec![b];
                if rng.below(2) == 0 {
                    bs.push(pick(rng, na));
                }
                bs.sort();
                bs.dedup();
                Constraint::must(a, &bs, w)
            }
            1 => Constraint::not(a, b, w),
            2 => {
                let mut as_ = vec![a];
                if rng.below(2) == 0 {
                    as_.push(pick(rng, na));
                }
                as_.sort();
                as_.dedup();
                Constraint::precedence(&as_, b, w)
            }
            _ => Constraint::neg_precedence(a, b, w),
        });
    }
    let model = DeclarativeModel::new(start, max_inst, constraints).unwrap();
    Knowledge { mapping, model }
}

/// A trace of `len` uniformly drawn event types.
pub fn random_trace(rng: &mut XorShift, k: &Knowledge, len: usize, finalized: bool) -> Trace {
    let ne = k.mapping.event_types().len() as u64;
    let types: Vec<EventTypeId> = (0..len).map(|_| EventTypeId(rng.below(ne) as u16)).collect();
    Trace::from_types(format!("random-{len}"), &types, finalized)
}

/// Like [`random_trace`], but the first event can open a start activity, so
/// fewer cases are invalid from the first event on.
pub fn friendly_trace(rng: &mut XorShift, k: &Knowledge, len: usize, finalized: bool) -> Trace {
    let ne = k.mapping.event_types().len();
    let opening: Vec<u16> = (0..ne as u16)
        .filter(|&e| {
            k.mapping.cand_steps(EventTypeId(e)).unwrap().iter().any(|&(a, s)| s.is_opening() && k.model.is_start(a))
        })
        .collect();
    let mut types = Vec::with_capacity(len);
    for i in 0..len {
        let e = if i == 0 && !opening.is_empty() {
            opening[rng.below(opening.len() as u64) as usize]
        } else {
            rng.below(ne as u64) as u16
        };
        types.push(EventTypeId(e));
    }
    Trace::from_types(format!("friendly-{len}"), &types, finalized)
}
