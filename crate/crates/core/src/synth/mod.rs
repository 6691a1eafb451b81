//! Synthetic process models and ground-truth-annotated traces.
//!
//! [`generate_syn_model`] samples a mapping and a declarative model with the
//! statistics of the SYN benchmark (16 activities, 16 event types, 1–5
//! activities per event type averaging 2.5, six must, four not and two
//! precedence constraints). [`generate_trace`] simulates interleaved activity
//! instances under a model and returns a finalized trace of an exact length
//! together with its valid interpretation.

mod dataset;
mod trace;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{
    ActivityId, Constraint, ConstraintKind, DeclarativeModel, EventTypeId, Knowledge, ModelError, StepType,
    TypeLevelMapping, Universe, Window,
};

pub use dataset::{
    generate_dataset, read_dataset, write_dataset, Dataset, DatasetSpec, LabeledTrace, Manifest, DATASET_FORMAT_VERSION,
};
pub use trace::{generate_trace, ActivityShape, GenConfig};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SynthError {
    #[error("no feasible model after {0} resamples")]
    NoFeasibleModel(usize),
    #[error("no valid trace of length {length} after {attempts} attempts")]
    InfeasibleLength { length: usize, attempts: usize },
    #[error("invalid generator spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("dataset {locus}: {message}")]
    Format { locus: String, message: String },
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for SynthError {
    fn from(e: std::io::Error) -> Self {
        SynthError::Io(e.to_string())
    }
}

/// Statistics of a SYN-style model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynModelSpec {
    pub activities: usize,
    pub event_types: usize,
    pub min_degree: usize,
    pub max_degree: usize,
    /// Target mean number of activities per event type; met exactly when feasible.
    pub mean_degree: f64,
    pub must: usize,
    pub not: usize,
    pub precedence: usize,
    pub neg_precedence: usize,
    pub start_activities: usize,
    pub max_instances: u32,
    /// Longest instance, in steps.
    pub max_steps: usize,
    /// Lengths the model must be able to produce a finalized valid trace of.
    pub trial_lengths: Vec<usize>,
}

impl Default for SynModelSpec {
    fn default() -> Self {
        SynModelSpec {
            activities: 16,
            event_types: 16,
            min_degree: 1,
            max_degree: 5,
            mean_degree: 2.5,
            must: 6,
            not: 4,
            precedence: 2,
            neg_precedence: 0,
            start_activities: 2,
            max_instances: 5,
            max_steps: 5,
            trial_lengths: vec![20, 40, 60],
        }
    }
}

const MODEL_RESAMPLES: usize = 100;
const TRIAL_ATTEMPTS: usize = 300;

/// Samples a model with `spec`'s statistics that can produce valid traces of every trial length.
pub fn generate_syn_model(spec: &SynModelSpec, seed: u64) -> Result<Knowledge, SynthError> {
    check_spec(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MODEL_RESAMPLES {
        let k = sample_model(spec, &mut rng)?;
        let cfg = GenConfig { retry_budget: TRIAL_ATTEMPTS, max_steps: spec.max_steps, ..GenConfig::default() };
        let feasible = spec.trial_lengths.iter().all(|&len| generate_trace(&k, len, &cfg, &mut rng).is_ok());
        if feasible {
            return Ok(k);
        }
    }
    Err(SynthError::NoFeasibleModel(MODEL_RESAMPLES))
}

fn check_spec(spec: &SynModelSpec) -> Result<(), SynthError> {
    let bad = |m: &str| Err(SynthError::Spec(m.to_string()));
    if spec.activities < 2 || spec.event_types == 0 {
        return bad("need at least two activities and one event type");
    }
    if spec.min_degree == 0 || spec.min_degree > spec.max_degree || spec.max_degree > spec.activities {
        return bad("degree bounds must satisfy 1 ≤ min ≤ max ≤ activities");
    }
    if spec.mean_degree < spec.min_degree as f64 || spec.mean_degree > spec.max_degree as f64 {
        return bad("mean degree outside the degree bounds");
    }
    if spec.start_activities == 0 || spec.start_activities > spec.activities {
        return bad("start activity count out of range");
    }
    if spec.max_instances == 0 || spec.max_steps == 0 {
        return bad("instances and steps must be positive");
    }
    Ok(())
}

fn sample_model(spec: &SynModelSpec, rng: &mut ChaCha8Rng) -> Result<Knowledge, SynthError> {
    let na = spec.activities;
    let ne = spec.event_types;

    // Degrees summing to round(mean · |E|), each within bounds.
    let total = (spec.mean_degree * ne as f64).round() as usize;
    let mut degree: Vec<usize> = (0..ne).map(|_| rng.gen_range(spec.min_degree..=spec.max_degree)).collect();
    let mut sum: usize = degree.iter().sum();
    while sum != total {
        let e = rng.gen_range(0..ne);
        if sum < total && degree[e] < spec.max_degree {
            degree[e] += 1;
            sum += 1;
        } else if sum > total && degree[e] > spec.min_degree {
            degree[e] -= 1;
            sum -= 1;
        }
    }

    // Activity sets per event type, then cover activities nobody picked.
    let acts: Vec<usize> = (0..na).collect();
    let mut sets: Vec<Vec<usize>> =
        degree.iter().map(|&d| acts.choose_multiple(rng, d).copied().collect::<Vec<_>>()).collect();
    for a in 0..na {
        if sets.iter().any(|s| s.contains(&a)) {
            continue;
        }
        // Swap `a` into an event type in place of an activity that is covered twice,
        // or failing that add it where the degree bound allows.
        let mut order: Vec<usize> = (0..ne).collect();
        order.shuffle(rng);
        let swap = order.iter().find_map(|&e| {
            (0..sets[e].len()).find(|&k| sets.iter().filter(|s| s.contains(&sets[e][k])).count() > 1).map(|k| (e, k))
        });
        match swap {
            Some((e, k)) => sets[e][k] = a,
            None => match order.iter().find(|&&e| sets[e].len() < spec.max_degree) {
                Some(&e) => sets[e].push(a),
                None => return Err(SynthError::Spec("too few mapping slots to cover every activity".into())),
            },
        }
    }

    // Step roles per (event type, activity). Multi-step activities split their
    // roles (opening, middle, closing) across the event types that realise
    // them, one role per event type unless the activity has too few event
    // types; single-step activities realise every step as `FirstAndLast`.
    let mut steps: Vec<Vec<Vec<StepType>>> = sets.iter().map(|s| vec![Vec::new(); s.len()]).collect();
    for a in 0..na {
        let mut slots: Vec<(usize, usize)> =
            sets.iter().enumerate().flat_map(|(e, s)| s.iter().position(|&x| x == a).map(|k| (e, k))).collect();
        slots.shuffle(rng);
        let long = spec.max_steps >= 2 && rng.gen_bool(0.8);
        let roles = if !long {
            vec![StepType::FirstAndLast]
        } else if spec.max_steps >= 3 && rng.gen_bool(0.7) {
            vec![StepType::First, StepType::Last, StepType::Intermediate]
        } else {
            vec![StepType::First, StepType::Last]
        };
        for (i, role) in roles.iter().enumerate() {
            steps[slots[i % slots.len()].0][slots[i % slots.len()].1].push(*role);
        }
        for &(e, k) in slots.iter().skip(roles.len()) {
            steps[e][k].push(*roles.choose(rng).unwrap());
        }
    }

    let activities = Universe::new((1..=na).map(|i| format!("A{i:02}"))).map_err(SynthError::Spec)?;
    let event_types = Universe::new((1..=ne).map(|i| format!("E{i:02}"))).map_err(SynthError::Spec)?;
    let mut triples = Vec::new();
    for (e, s) in sets.iter().enumerate() {
        for (k, &a) in s.iter().enumerate() {
            let mut st = steps[e][k].clone();
            st.sort();
            st.dedup();
            for x in st {
                triples.push((EventTypeId(e as u16), ActivityId(a as u16), x));
            }
        }
    }
    let mapping = TypeLevelMapping::new(activities, event_types, triples)
        .map_err(|t| SynthError::Spec(format!("duplicate triple {t:?}")))?;

    // Constraints over a random activity order: must-constraints point forward
    // so that their chains terminate.
    let mut order: Vec<ActivityId> = (0..na).map(|a| ActivityId(a as u16)).collect();
    order.shuffle(rng);
    let start: Vec<ActivityId> = order[..spec.start_activities].to_vec();
    let rank = |a: ActivityId| order.iter().position(|&x| x == a).unwrap();
    let mut constraints: Vec<Constraint> = Vec::new();
    let mut used = std::collections::BTreeSet::new();
    let mut fresh_pair = |rng: &mut ChaCha8Rng, forward: bool, not_start_target: bool| {
        for _ in 0..10_000 {
            let a = ActivityId(rng.gen_range(0..na) as u16);
            let b = ActivityId(rng.gen_range(0..na) as u16);
            if a == b || (forward && rank(a) >= rank(b)) || (not_start_target && start.contains(&b)) {
                continue;
            }
            if used.insert((a, b)) {
                return Ok((a, b));
            }
        }
        Err(SynthError::Spec("not enough distinct activity pairs for the constraints".into()))
    };
    for _ in 0..spec.must {
        let (a, b) = fresh_pair(rng, true, false)?;
        constraints.push(Constraint::must(a, &[b], Window::steps(rng.gen_range(4..=12))));
    }
    for _ in 0..spec.not {
        let (a, b) = fresh_pair(rng, false, false)?;
        constraints.push(Constraint::not(a, b, Window::steps(rng.gen_range(1..=4))));
    }
    for _ in 0..spec.precedence {
        let (a, b) = fresh_pair(rng, false, true)?;
        constraints.push(Constraint::precedence(&[a], b, Window::steps(rng.gen_range(4..=10))));
    }
    for _ in 0..spec.neg_precedence {
        let (a, b) = fresh_pair(rng, false, false)?;
        constraints.push(Constraint::neg_precedence(a, b, Window::steps(rng.gen_range(1..=4))));
    }
    let model = DeclarativeModel::new(start, vec![Some(spec.max_instances); na], constraints).map_err(SynthError::Spec)?;
    Ok(Knowledge { mapping, model })
}

/// Constraint counts by kind: (must, not, precedence, negative precedence).
pub fn constraint_census(k: &Knowledge) -> (usize, usize, usize, usize) {
    let count = |kind| k.model.constraints().iter().filter(|c| c.kind == kind).count();
    (
        count(ConstraintKind::Must),
        count(ConstraintKind::Not),
        count(ConstraintKind::Precedence),
        count(ConstraintKind::NegPrecedence),
    )
}

/// Deterministic per-item seed derived from a dataset seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, item: u64) -> u64 {
    let mut z = seed ^ item.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
