//! Accuracy and latency of the three usage scenarios on labelled traces:
//! tagger only (T), tagger restricted to the mapping's candidates (T+A), and
//! tagger revised by the reasoner through the full pipeline (T+R).

mod report;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::aaf::Budget;
use crate::model::{ActivityId, Knowledge};
use crate::pipeline::{Analysis, PipelineConfig, PipelineError, Predictor};
use crate::reasoner::Session;
use crate::synth::{Dataset, LabeledTrace};
use crate::tagger::{argmax, train_with_validation, ArchSpec, EmbeddingConfig, LabeledSequence, Tagger, TaggerError, TrainConfig};

pub use report::{Bucket, MetricsRow, MetricsTable, PlotData, ReportFormat, Series, CSV_HEADER};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Tagger(#[from] TaggerError),
    #[error("trace {trace}: {message}")]
    Contract { trace: String, message: String },
    #[error("report: {0}")]
    Report(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for EvalError {
    fn from(e: std::io::Error) -> Self {
        EvalError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub pipeline: PipelineConfig,
    /// Solver budget per reasoner query.
    pub budget: Budget,
    /// Evaluate traces on the rayon pool; per-event times then include contention.
    pub parallel: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { pipeline: PipelineConfig::default(), budget: Budget::default(), parallel: false }
    }
}

/// Raw counts and time sums for a set of events.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Tally {
    pub events: usize,
    pub correct_t: usize,
    pub correct_ta: usize,
    pub correct_tr: usize,
    pub time_t_ms: f64,
    pub time_ta_ms: f64,
    pub time_tr_ms: f64,
    /// Events with an empty T+R support.
    pub deviations: usize,
    /// Events whose validity check overflowed.
    pub unresolved: usize,
}

impl Tally {
    fn add(&mut self, o: &Tally) {
        self.events += o.events;
        self.correct_t += o.correct_t;
        self.correct_ta += o.correct_ta;
        self.correct_tr += o.correct_tr;
        self.time_t_ms += o.time_t_ms;
        self.time_ta_ms += o.time_ta_ms;
        self.time_tr_ms += o.time_tr_ms;
        self.deviations += o.deviations;
        self.unresolved += o.unresolved;
    }

    fn row(&self, arch: &str, bucket: Bucket, fraction: u32) -> MetricsRow {
        let n = self.events.max(1) as f64;
        let pct = |c: usize| 100.0 * c as f64 / n;
        MetricsRow {
            arch: arch.to_string(),
            bucket,
            fraction,
            acc_t: pct(self.correct_t),
            acc_ta: pct(self.correct_ta),
            acc_tr: pct(self.correct_tr),
            time_t_ms: self.time_t_ms / n,
            time_ta_ms: self.time_ta_ms / n,
            time_tr_ms: self.time_tr_ms / n,
        }
    }
}

/// Result of [`evaluate`]: totals per trace length plus the metrics table
/// (one row per length and an event-weighted `ALL` row).
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub by_length: BTreeMap<usize, Tally>,
    pub total: Tally,
    pub table: MetricsTable,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Index of the best candidate; ties go to the lower activity id.
fn restricted_argmax(pd: &[f64], allowed: &[ActivityId]) -> Option<ActivityId> {
    let mut best: Option<ActivityId> = None;
    for &a in allowed {
        if best.is_none_or(|b| pd[a.index()] > pd[b.index()] || (pd[a.index()] == pd[b.index()] && a < b)) {
            best = Some(a);
        }
    }
    best
}

/// Scores one trace under the three scenarios.
pub fn evaluate_trace<P: Predictor>(
    t: &LabeledTrace,
    predictor: &P,
    knowledge: &Arc<Knowledge>,
    opts: &EvalOptions,
) -> Result<Tally, EvalError> {
    let contract = |m: String| EvalError::Contract { trace: t.trace.id.clone(), message: m };
    let labels = t.activities();
    if labels.len() != t.trace.len() {
        return Err(contract(format!("{} events but {} labels", t.trace.len(), labels.len())));
    }
    let n = knowledge.mapping.activities().len();
    if let Some(y) = labels.iter().find(|y| y.index() >= n) {
        return Err(contract(format!("label {} outside the {n} activities", y.index())));
    }
    let mut tally = Tally { events: t.trace.len(), ..Tally::default() };

    // Tagger-only scenarios first, in their own pass, so their timings are not
    // inflated by the reasoner evicting the weights from cache between events.
    let mut state = predictor.start();
    for (e, &y) in t.trace.events.iter().zip(&labels) {
        let start = Instant::now();
        let pd = predictor.predict(&mut state, e)?;
        tally.time_t_ms += ms(start);
        let t_pred = ActivityId(argmax(&pd) as u16);
        let cand = knowledge.mapping.cand_act(e.etype).map_err(|x| contract(x.to_string()))?;
        let ta_pred = restricted_argmax(&pd, &cand);
        tally.time_ta_ms += ms(start);
        tally.correct_t += usize::from(t_pred == y);
        tally.correct_ta += usize::from(ta_pred == Some(y));
    }

    let session = Session::new(Arc::clone(knowledge)).with_budget(opts.budget);
    let mut an = Analysis::with_session(session, predictor, opts.pipeline.clone())?;
    for (e, &y) in t.trace.events.iter().zip(&labels) {
        let start = Instant::now();
        let r = an.process_event(e)?;
        tally.time_tr_ms += ms(start);
        tally.correct_tr += usize::from(r.top() == Some(y));
        tally.deviations += usize::from(r.deviation);
        tally.unresolved += usize::from(r.unresolved);
    }
    Ok(tally)
}

/// Scores every trace of `ds`; rows are labelled with `arch` and `fraction`.
pub fn evaluate<P: Predictor + Sync>(
    ds: &Dataset,
    predictor: &P,
    knowledge: &Arc<Knowledge>,
    opts: &EvalOptions,
    arch: &str,
    fraction: u32,
) -> Result<Evaluation, EvalError> {
    let tallies: Vec<Tally> = if opts.parallel {
        ds.traces.par_iter().map(|t| evaluate_trace(t, predictor, knowledge, opts)).collect::<Result<_, _>>()?
    } else {
        ds.traces.iter().map(|t| evaluate_trace(t, predictor, knowledge, opts)).collect::<Result<_, _>>()?
    };
    let mut by_length: BTreeMap<usize, Tally> = BTreeMap::new();
    let mut total = Tally::default();
    for (t, tally) in ds.traces.iter().zip(&tallies) {
        by_length.entry(t.len()).or_default().add(tally);
        total.add(tally);
    }
    let mut rows: Vec<MetricsRow> = by_length.iter().map(|(&len, t)| t.row(arch, Bucket::Length(len), fraction)).collect();
    rows.push(total.row(arch, Bucket::All, fraction));
    Ok(Evaluation { by_length, total, table: MetricsTable { rows } })
}

/// Label sequences borrowed from a dataset.
pub fn sequences<'a>(ds: &'a Dataset, labels: &'a [Vec<ActivityId>]) -> Vec<LabeledSequence<'a>> {
    ds.traces.iter().zip(labels).map(|(t, l)| LabeledSequence { events: &t.trace.events, labels: l }).collect()
}

/// Trains a fresh tagger on `train`, recording validation loss on `validation`.
pub fn train_tagger(
    knowledge: &Knowledge,
    train: &Dataset,
    validation: &Dataset,
    arch: &ArchSpec,
    embedding: &EmbeddingConfig,
    cfg: &TrainConfig,
) -> Result<Tagger, EvalError> {
    let tagger = Tagger::new(arch.clone(), embedding.clone(), &knowledge.mapping, cfg.seed)?;
    let (tl, vl) = (train.activity_labels(), validation.activity_labels());
    Ok(train_with_validation(tagger, &sequences(train, &tl), &sequences(validation, &vl), cfg)?)
}

/// What [`sweep_training_fraction`] trains.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Percentages of the training split, each in `1..=100`.
    pub fractions: Vec<u32>,
    pub arch: ArchSpec,
    pub embedding: EmbeddingConfig,
    pub train: TrainConfig,
    /// Seed for the subsamples.
    pub seed: u64,
}

impl SweepSpec {
    pub fn new(arch: ArchSpec) -> Self {
        SweepSpec {
            fractions: vec![20, 40, 60, 80, 90, 100],
            train: TrainConfig::for_arch(&arch),
            arch,
            embedding: EmbeddingConfig::default(),
            seed: 0,
        }
    }
}

/// For each fraction `r`: trains on a seeded `r`% subsample of `train` and
/// evaluates on the fixed `test` set. `progress` sees each finished row.
pub fn sweep_training_fraction(
    train: &Dataset,
    test: &Dataset,
    knowledge: &Arc<Knowledge>,
    spec: &SweepSpec,
    opts: &EvalOptions,
    mut progress: impl FnMut(&Evaluation),
) -> Result<MetricsTable, EvalError> {
    if spec.fractions.iter().any(|&r| r == 0 || r > 100) {
        return Err(EvalError::Report("fractions must lie in 1..=100".into()));
    }
    let mut rows = Vec::new();
    for &r in &spec.fractions {
        let part = train.subsample(r, crate::synth::derive_seed(spec.seed, r as u64));
        let tagger = train_tagger(knowledge, &part, test, &spec.arch, &spec.embedding, &spec.train)?;
        let ev = evaluate(test, &tagger, knowledge, opts, &spec.arch.name(), r)?;
        progress(&ev);
        rows.extend(ev.table.rows);
    }
    Ok(MetricsTable { rows })
}

#[cfg(test)]
mod tests;
