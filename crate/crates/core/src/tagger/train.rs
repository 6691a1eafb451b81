//! Mini-batch training with Adam and cross-entropy loss.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{ActivityId, Event};
use crate::synth::derive_seed;

use super::{ArchSpec, Body, Tagger, TaggerError};

/// A trace with one activity label per event.
#[derive(Debug, Clone, Copy)]
pub struct LabeledSequence<'a> {
    pub events: &'a [Event],
    pub labels: &'a [ActivityId],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Share of traces held out to record validation loss (no early stopping).
    pub validation_fraction: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// Defaults per architecture: 10 epochs for MA, 50 for MB; batch 32, learning rate 1e-4.
    pub fn for_arch(arch: &ArchSpec) -> Self {
        let epochs = match arch {
            ArchSpec::Ma { .. } => 10,
            ArchSpec::Mb { .. } => 50,
        };
        TrainConfig { epochs, batch_size: 32, learning_rate: 1e-4, validation_fraction: 0.2, seed: 0 }
    }
}

struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    fn new(n: usize, lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }

    fn step(&mut self, p: &mut [f64], g: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for k in 0..p.len() {
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g[k];
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g[k] * g[k];
            p[k] -= self.lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + self.eps);
        }
    }
}

fn check_data(t: &Tagger, data: &[LabeledSequence<'_>]) -> Result<(), TaggerError> {
    if data.iter().all(|s| s.events.is_empty()) {
        return Err(TaggerError::EmptyDataset);
    }
    for (n, s) in data.iter().enumerate() {
        if s.events.len() != s.labels.len() {
            return Err(TaggerError::LengthMismatch { trace: n, events: s.events.len(), labels: s.labels.len() });
        }
        for e in s.events {
            t.check_event(e)?;
        }
        if let Some(y) = s.labels.iter().find(|y| y.index() >= t.activity_count()) {
            return Err(TaggerError::LabelOutOfRange { label: y.index(), activities: t.activity_count() });
        }
    }
    Ok(())
}

/// A unit of work: MB batches hold `(trace, position)` windows, MA batches
/// hold whole traces of one length.
enum Batch {
    Windows(Vec<(usize, usize)>),
    Traces(Vec<usize>),
}

fn batches(t: &Tagger, data: &[LabeledSequence<'_>], ids: &[usize], size: usize, rng: Option<&mut ChaCha8Rng>) -> Vec<Batch> {
    let size = size.max(1);
    match &t.net.body {
        Body::Mb { .. } => {
            let mut items: Vec<(usize, usize)> =
                ids.iter().flat_map(|&n| (0..data[n].events.len()).map(move |i| (n, i))).collect();
            if let Some(r) = rng {
                items.shuffle(r);
            }
            items.chunks(size).map(|c| Batch::Windows(c.to_vec())).collect()
        }
        Body::Ma { .. } => {
            let mut by_len: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
            for &n in ids {
                if !data[n].events.is_empty() {
                    by_len.entry(data[n].events.len()).or_default().push(n);
                }
            }
            let mut out = Vec::new();
            let mut rng = rng;
            for (_, mut group) in by_len {
                if let Some(r) = rng.as_deref_mut() {
                    group.shuffle(r);
                }
                out.extend(group.chunks(size).map(|c| Batch::Traces(c.to_vec())));
            }
            if let Some(r) = rng {
                out.shuffle(r);
            }
            out
        }
    }
}

/// Returns (mean loss, events in batch).
fn run_batch(
    t: &Tagger,
    p: &[f64],
    g: Option<&mut [f64]>,
    data: &[LabeledSequence<'_>],
    b: &Batch,
    rng: Option<&mut ChaCha8Rng>,
) -> (f64, usize) {
    match b {
        Batch::Windows(items) => {
            let windows: Vec<(&[Event], usize)> = items.iter().map(|&(n, i)| (data[n].events, i)).collect();
            let targets: Vec<usize> = items.iter().map(|&(n, i)| data[n].labels[i].index()).collect();
            (t.net.window_loss(p, g, &windows, &targets, rng), items.len())
        }
        Batch::Traces(ids) => {
            let traces: Vec<&[Event]> = ids.iter().map(|&n| data[n].events).collect();
            let targets: Vec<Vec<usize>> = ids.iter().map(|&n| data[n].labels.iter().map(|y| y.index()).collect()).collect();
            let refs: Vec<&[usize]> = targets.iter().map(Vec::as_slice).collect();
            let events = traces.len() * traces[0].len();
            (t.net.sequence_loss(p, g, &traces, &refs, rng), events)
        }
    }
}

fn mean_loss(t: &Tagger, data: &[LabeledSequence<'_>], ids: &[usize], size: usize) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for b in batches(t, data, ids, size, None) {
        let (l, k) = run_batch(t, &t.params, None, data, &b, None);
        sum += l * k as f64;
        n += k;
    }
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Trains `tagger` in place of its current weights, holding out
/// `cfg.validation_fraction` of the traces to record validation loss. The
/// split, the batch order and the dropout masks all derive from `cfg.seed`,
/// so equal inputs give bitwise-equal weights.
pub fn train(tagger: Tagger, data: &[LabeledSequence<'_>], cfg: &TrainConfig) -> Result<Tagger, TaggerError> {
    check_config(cfg)?;
    let mut split_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0));
    let mut ids: Vec<usize> = (0..data.len()).collect();
    ids.shuffle(&mut split_rng);
    let n_val = ((data.len() as f64 * cfg.validation_fraction).floor() as usize).min(data.len().saturating_sub(1));
    let (val, trn) = ids.split_at(n_val);
    let mut trn = trn.to_vec();
    trn.sort_unstable();
    let mut val = val.to_vec();
    val.sort_unstable();
    let pick = |ids: &[usize]| ids.iter().map(|&n| data[n]).collect::<Vec<_>>();
    train_with_validation(tagger, &pick(&trn), &pick(&val), cfg)
}

/// Trains on `data` and records the loss on `validation` after every epoch
/// (`cfg.validation_fraction` is ignored).
pub fn train_with_validation(
    mut tagger: Tagger,
    data: &[LabeledSequence<'_>],
    validation: &[LabeledSequence<'_>],
    cfg: &TrainConfig,
) -> Result<Tagger, TaggerError> {
    check_config(cfg)?;
    check_data(&tagger, data)?;
    if validation.iter().any(|s| !s.events.is_empty()) {
        check_data(&tagger, validation)?;
    }
    let mut order_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1));
    let mut drop_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 2));
    let trn: Vec<usize> = (0..data.len()).collect();
    let val: Vec<usize> = (0..validation.len()).collect();

    let mut adam = Adam::new(tagger.params.len(), cfg.learning_rate);
    let mut g = vec![0.0; tagger.params.len()];
    let mut train_loss = Vec::with_capacity(cfg.epochs);
    let mut val_loss = Vec::new();
    for _ in 0..cfg.epochs {
        let (mut sum, mut n) = (0.0, 0usize);
        for b in batches(&tagger, data, &trn, cfg.batch_size, Some(&mut order_rng)) {
            g.fill(0.0);
            let (l, k) = run_batch(&tagger, &tagger.params, Some(&mut g), data, &b, Some(&mut drop_rng));
            adam.step(&mut tagger.params, &g);
            sum += l * k as f64;
            n += k;
        }
        train_loss.push(sum / n as f64);
        if validation.iter().any(|s| !s.events.is_empty()) {
            val_loss.push(mean_loss(&tagger, validation, &val, cfg.batch_size.max(256)));
        }
    }
    tagger.meta = super::TrainingMeta {
        seed: tagger.meta.seed,
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate,
        train_traces: data.len(),
        validation_traces: validation.len(),
        train_loss,
        validation_loss: val_loss,
    };
    Ok(tagger)
}

fn check_config(cfg: &TrainConfig) -> Result<(), TaggerError> {
    if cfg.batch_size == 0 || !(0.0..1.0).contains(&cfg.validation_fraction) || !(cfg.learning_rate > 0.0) {
        return Err(TaggerError::Spec("batch size, learning rate and validation fraction out of range".into()));
    }
    Ok(())
}
