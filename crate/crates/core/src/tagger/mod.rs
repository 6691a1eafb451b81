//! Neural sequence taggers mapping each event of a running trace to a
//! probability distribution over activities.
//!
//! Two architectures are provided:
//!
//! * [`ArchSpec::ma`] — stacked LSTM (input 4, hidden 32, three layers,
//!   dropout 0.1) followed by dense layers 32→64→32→|𝒜| with ReLU and softmax;
//! * [`ArchSpec::mb`] — a feed-forward network over a window of the last K
//!   event vectors: K·4→128→256→128→32→|𝒜| with ReLU and softmax.
//!
//! Events are embedded by a jointly trained lookup table of width 4 (or
//! one-hot), optionally followed by min-max scaled numeric attributes.
//! Backpropagation is written by hand and verified by [`gradient_check`].

mod embed;
mod gradcheck;
mod net;
mod train;

use std::collections::VecDeque;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Event, TypeLevelMapping};

pub use embed::{EmbeddingConfig, NumericField, TypeEncoding};
pub use gradcheck::{gradient_check, GradientReport};
pub use net::{Block, Layout};
pub use train::{train, train_with_validation, LabeledSequence, TrainConfig};

use net::{softmax_rows, softmax_xent, Dense, DenseCache, Lstm, LstmStep, Mlp};

pub const TAGGER_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TaggerError {
    #[error("training set is empty")]
    EmptyDataset,
    #[error("trace {trace} has {events} events but {labels} labels")]
    LengthMismatch { trace: usize, events: usize, labels: usize },
    #[error("label {label} outside the {activities} activities")]
    LabelOutOfRange { label: usize, activities: usize },
    #[error("event type {etype} outside the {event_types} event types")]
    UnknownEventType { etype: usize, event_types: usize },
    #[error("decoding state belongs to a different architecture")]
    StateMismatch,
    #[error("invalid tagger spec: {0}")]
    Spec(String),
    #[error("tagger file: {0}")]
    Format(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for TaggerError {
    fn from(e: std::io::Error) -> Self {
        TaggerError::Io(e.to_string())
    }
}

/// Network architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArchSpec {
    /// Stacked LSTM, then dense layers `dense[0] → dense[1] → … → |𝒜|`.
    Ma { hidden: usize, layers: usize, dense: Vec<usize>, dropout: f64 },
    /// Feed-forward over the last `window` event vectors.
    Mb { window: usize, hidden: Vec<usize> },
}

impl ArchSpec {
    pub fn ma() -> Self {
        ArchSpec::Ma { hidden: 32, layers: 3, dense: vec![64, 32], dropout: 0.1 }
    }

    pub fn mb(window: usize) -> Self {
        ArchSpec::Mb { window, hidden: vec![128, 256, 128, 32] }
    }

    /// `MA`, `MB_5`, …
    pub fn name(&self) -> String {
        match self {
            ArchSpec::Ma { .. } => "MA".into(),
            ArchSpec::Mb { window, .. } => format!("MB_{window}"),
        }
    }

    /// Parses `MA` or `MB_<K>` (case-insensitive) into the standard sizes.
    pub fn from_name(s: &str) -> Option<Self> {
        let s = s.to_ascii_uppercase();
        if s == "MA" {
            return Some(Self::ma());
        }
        let k: usize = s.strip_prefix("MB_").or_else(|| s.strip_prefix("MB"))?.parse().ok()?;
        (k >= 1).then(|| Self::mb(k))
    }

    fn check(&self) -> Result<(), TaggerError> {
        let bad = |m: &str| Err(TaggerError::Spec(m.into()));
        match self {
            ArchSpec::Ma { hidden, layers, dense, dropout } => {
                if *hidden == 0 || *layers == 0 || dense.contains(&0) {
                    return bad("layer sizes must be positive");
                }
                if !(0.0..1.0).contains(dropout) {
                    return bad("dropout must be in [0, 1)");
                }
            }
            ArchSpec::Mb { window, hidden } => {
                if *window == 0 || hidden.contains(&0) {
                    return bad("window and layer sizes must be positive");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Body {
    Ma { lstm: Vec<Lstm>, dropout: f64, head: Mlp },
    Mb { window: usize, mlp: Mlp },
}

/// Parameter layout plus the layer graph, derived deterministically from the spec.
#[derive(Debug, Clone)]
struct Network {
    layout: Layout,
    table: Option<usize>,
    body: Body,
    emb: EmbeddingConfig,
    event_types: usize,
}

/// Gathered inputs for one embedded event slot: its type (for table gradients).
type Slot = Option<usize>;

impl Network {
    fn new(arch: &ArchSpec, emb: &EmbeddingConfig, event_types: usize, activities: usize) -> Self {
        let mut layout = Layout::default();
        let table = match emb.event_type {
            TypeEncoding::Learned { dim } => Some(layout.push("embedding".into(), event_types, dim)),
            TypeEncoding::OneHot => None,
        };
        let w = emb.width(event_types);
        let body = match arch {
            ArchSpec::Ma { hidden, layers, dense, dropout } => {
                let lstm = (0..*layers)
                    .map(|k| Lstm::new(&mut layout, &format!("lstm{k}"), if k == 0 { w } else { *hidden }, *hidden))
                    .collect();
                let mut sizes = vec![*hidden];
                sizes.extend(dense);
                sizes.push(activities);
                let layers = (0..sizes.len() - 1)
                    .map(|k| {
                        let last = k + 2 == sizes.len();
                        // Dropout between stacked LSTM layers and after the first dense layer.
                        let drop = if k == 1 && !last { *dropout } else { 0.0 };
                        Dense::new(&mut layout, &format!("dense{k}"), sizes[k], sizes[k + 1], !last, drop)
                    })
                    .collect();
                Body::Ma { lstm, dropout: *dropout, head: Mlp { layers } }
            }
            ArchSpec::Mb { window, hidden } => {
                let mut sizes = vec![window * w];
                sizes.extend(hidden);
                sizes.push(activities);
                let layers = (0..sizes.len() - 1)
                    .map(|k| Dense::new(&mut layout, &format!("dense{k}"), sizes[k], sizes[k + 1], k + 2 != sizes.len(), 0.0))
                    .collect();
                Body::Mb { window: *window, mlp: Mlp { layers } }
            }
        };
        Network { layout, table, body, emb: emb.clone(), event_types }
    }

    fn width(&self) -> usize {
        self.emb.width(self.event_types)
    }

    /// Seeded uniform initialization scaled by fan-in.
    fn init_params(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = vec![0.0; self.layout.len];
        let mut fill = |p: &mut [f64], id: usize, bound: f64| {
            for v in self.layout.slice_mut(id, p) {
                *v = rng.gen_range(-bound..=bound);
            }
        };
        if let Some(t) = self.table {
            fill(&mut p, t, 1.0);
        }
        match &self.body {
            Body::Ma { lstm, head, .. } => {
                for l in lstm {
                    let bound = 1.0 / (l.hidden as f64).sqrt();
                    for id in l.blocks() {
                        fill(&mut p, id, bound);
                    }
                }
                for d in &head.layers {
                    let bound = 1.0 / (d.fan_in(&self.layout) as f64).sqrt();
                    for id in d.blocks() {
                        fill(&mut p, id, bound);
                    }
                }
            }
            Body::Mb { mlp, .. } => {
                for d in &mlp.layers {
                    let bound = 1.0 / (d.fan_in(&self.layout) as f64).sqrt();
                    for id in d.blocks() {
                        fill(&mut p, id, bound);
                    }
                }
            }
        }
        p
    }

    fn encode(&self, p: &[f64], e: &Event, out: &mut [f64]) {
        let table = self.table.map(|t| self.layout.slice(t, p)).unwrap_or(&[]);
        self.emb.encode_into(e, self.event_types, table, out);
    }

    /// Scatters d(loss)/d(event vector) into the embedding table gradient.
    fn scatter(&self, g: &mut [f64], slot: Slot, d: ndarray::ArrayView1<'_, f64>) {
        let (Some(t), Some(etype), TypeEncoding::Learned { dim }) = (self.table, slot, self.emb.event_type) else {
            return;
        };
        let rows = self.layout.slice_mut(t, g);
        for k in 0..dim {
            rows[etype * dim + k] += d[k];
        }
    }

    /// Mean cross-entropy over a batch of windows (`(trace, 0-based position)`),
    /// accumulating gradients into `g` when given.
    fn window_loss(
        &self,
        p: &[f64],
        g: Option<&mut [f64]>,
        items: &[(&[Event], usize)],
        targets: &[usize],
        rng: Option<&mut ChaCha8Rng>,
    ) -> f64 {
        let Body::Mb { window, mlp } = &self.body else { unreachable!("window batches are for MB") };
        let w = self.width();
        let mut x = Array2::<f64>::zeros((items.len(), window * w));
        let mut slots: Vec<Slot> = vec![None; items.len() * window];
        for (r, &(events, pos)) in items.iter().enumerate() {
            for k in 0..*window {
                // Slot k holds event pos − (window − 1) + k; earlier slots stay zero.
                let Some(i) = (pos + k + 1).checked_sub(*window) else { continue };
                let row = x.row_mut(r);
                let dst = row.into_slice().expect("standard layout");
                self.encode(p, &events[i], &mut dst[k * w..(k + 1) * w]);
                slots[r * window + k] = Some(events[i].etype.index());
            }
        }
        let (mut logits, caches) = mlp.forward(&self.layout, p, x, rng);
        let loss = softmax_xent(&mut logits, targets);
        if let Some(g) = g {
            let dx = mlp.backward(&self.layout, p, g, &caches, logits);
            for (r, row) in dx.rows().into_iter().enumerate() {
                for k in 0..*window {
                    self.scatter(g, slots[r * window + k], row.slice(ndarray::s![k * w..(k + 1) * w]));
                }
            }
        }
        loss
    }

    /// Mean per-event cross-entropy over equally long traces, with
    /// backpropagation through time when `g` is given.
    fn sequence_loss(
        &self,
        p: &[f64],
        g: Option<&mut [f64]>,
        traces: &[&[Event]],
        targets: &[&[usize]],
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> f64 {
        let Body::Ma { lstm, dropout, head } = &self.body else { unreachable!("sequence batches are for MA") };
        let batch = traces.len();
        let len = traces[0].len();
        let w = self.width();
        let mut xs: Vec<Array2<f64>> = (0..len)
            .map(|t| {
                let mut x = Array2::<f64>::zeros((batch, w));
                for (r, tr) in traces.iter().enumerate() {
                    let row = x.row_mut(r);
                    self.encode(p, &tr[t], row.into_slice().expect("standard layout"));
                }
                x
            })
            .collect();
        let mut steps: Vec<Vec<LstmStep>> = Vec::with_capacity(lstm.len());
        let mut masks: Vec<Vec<Option<Array2<f64>>>> = Vec::with_capacity(lstm.len());
        for (k, layer) in lstm.iter().enumerate() {
            let mut h = Array2::<f64>::zeros((batch, layer.hidden));
            let mut c = Array2::<f64>::zeros((batch, layer.hidden));
            let mut layer_steps = Vec::with_capacity(len);
            let mut outs = Vec::with_capacity(len);
            for x in &xs {
                let (h2, c2, st) = layer.step(&self.layout, p, x, &h, &c);
                layer_steps.push(st);
                h = h2;
                c = c2;
                outs.push(h.clone());
            }
            // Dropout between stacked layers only.
            let mut layer_masks = vec![None; len];
            if k + 1 < lstm.len() {
                if let Some(r) = rng.as_deref_mut() {
                    if *dropout > 0.0 {
                        let keep = 1.0 / (1.0 - dropout);
                        for (t, o) in outs.iter_mut().enumerate() {
                            let m = Array2::from_shape_fn(o.raw_dim(), |_| if r.gen::<f64>() < *dropout { 0.0 } else { keep });
                            *o *= &m;
                            layer_masks[t] = Some(m);
                        }
                    }
                }
            }
            steps.push(layer_steps);
            masks.push(layer_masks);
            xs = outs;
        }
        // Head over all (time, trace) rows at once: row t·B + r.
        let hidden = lstm.last().expect("at least one layer").hidden;
        let mut top = Array2::<f64>::zeros((len * batch, hidden));
        for (t, x) in xs.iter().enumerate() {
            top.slice_mut(ndarray::s![t * batch..(t + 1) * batch, ..]).assign(x);
        }
        let flat_targets: Vec<usize> = (0..len).flat_map(|t| targets.iter().map(move |tg| tg[t])).collect();
        let (mut logits, caches): (Array2<f64>, Vec<DenseCache>) = head.forward(&self.layout, p, top, rng);
        let loss = softmax_xent(&mut logits, &flat_targets);
        let Some(g) = g else { return loss };
        let dtop = head.backward(&self.layout, p, g, &caches, logits);
        let mut dh: Vec<Array2<f64>> =
            (0..len).map(|t| dtop.slice(ndarray::s![t * batch..(t + 1) * batch, ..]).to_owned()).collect();
        for k in (0..lstm.len()).rev() {
            for (t, d) in dh.iter_mut().enumerate() {
                if let Some(m) = &masks[k][t] {
                    *d *= m;
                }
            }
            dh = lstm[k].backward(&self.layout, p, g, &steps[k], &dh);
        }
        for (t, dx) in dh.iter().enumerate() {
            for (r, tr) in traces.iter().enumerate() {
                self.scatter(g, Some(tr[t].etype.index()), dx.row(r));
            }
        }
        loss
    }
}

/// Per-trace decoding state.
#[derive(Debug, Clone, PartialEq)]
pub enum DecodingState {
    /// Hidden and cell vectors per LSTM layer.
    Ma { h: Vec<Vec<f64>>, c: Vec<Vec<f64>> },
    /// The last `window − 1` event vectors, oldest first.
    Mb { buffer: VecDeque<Vec<f64>> },
}

/// Where a tagger came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub train_traces: usize,
    pub validation_traces: usize,
    /// Mean training loss per epoch (dropout active).
    pub train_loss: Vec<f64>,
    /// Mean validation loss per epoch; empty without a validation split.
    pub validation_loss: Vec<f64>,
}

/// A tagger with its weights.
#[derive(Debug, Clone)]
pub struct Tagger {
    arch: ArchSpec,
    embedding: EmbeddingConfig,
    activities: Vec<String>,
    event_types: Vec<String>,
    params: Vec<f64>,
    meta: TrainingMeta,
    net: Network,
}

impl PartialEq for Tagger {
    fn eq(&self, o: &Self) -> bool {
        self.arch == o.arch
            && self.embedding == o.embedding
            && self.activities == o.activities
            && self.event_types == o.event_types
            && self.params == o.params
            && self.meta == o.meta
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaggerDoc {
    v: u32,
    arch: ArchSpec,
    embedding: EmbeddingConfig,
    activities: Vec<String>,
    event_types: Vec<String>,
    layout: Layout,
    params: Vec<f64>,
    meta: TrainingMeta,
}

impl Tagger {
    /// A freshly initialized tagger over the activities and event types of `mapping`.
    pub fn new(arch: ArchSpec, embedding: EmbeddingConfig, mapping: &TypeLevelMapping, seed: u64) -> Result<Self, TaggerError> {
        Self::with_names(arch, embedding, mapping.activities().names().to_vec(), mapping.event_types().names().to_vec(), seed)
    }

    pub fn with_names(
        arch: ArchSpec,
        embedding: EmbeddingConfig,
        activities: Vec<String>,
        event_types: Vec<String>,
        seed: u64,
    ) -> Result<Self, TaggerError> {
        arch.check()?;
        if activities.is_empty() || event_types.is_empty() {
            return Err(TaggerError::Spec("need at least one activity and one event type".into()));
        }
        if matches!(embedding.event_type, TypeEncoding::Learned { dim: 0 }) {
            return Err(TaggerError::Spec("embedding width must be positive".into()));
        }
        let net = Network::new(&arch, &embedding, event_types.len(), activities.len());
        let params = net.init_params(seed);
        Ok(Tagger { arch, embedding, activities, event_types, params, meta: TrainingMeta { seed, ..Default::default() }, net })
    }

    pub fn arch(&self) -> &ArchSpec {
        &self.arch
    }

    pub fn embedding(&self) -> &EmbeddingConfig {
        &self.embedding
    }

    pub fn activity_count(&self) -> usize {
        self.activities.len()
    }

    pub fn activity_names(&self) -> &[String] {
        &self.activities
    }

    pub fn event_type_names(&self) -> &[String] {
        &self.event_types
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn layout(&self) -> &Layout {
        &self.net.layout
    }

    pub fn meta(&self) -> &TrainingMeta {
        &self.meta
    }

    /// Whether the tagger was built for these activity and event type names.
    pub fn fits(&self, mapping: &TypeLevelMapping) -> bool {
        self.activities == mapping.activities().names() && self.event_types == mapping.event_types().names()
    }

    /// The event vector fed to the network.
    pub fn embed_event(&self, e: &Event) -> Result<Vec<f64>, TaggerError> {
        self.check_event(e)?;
        let mut v = vec![0.0; self.net.width()];
        self.net.encode(&self.params, e, &mut v);
        Ok(v)
    }

    fn check_event(&self, e: &Event) -> Result<(), TaggerError> {
        if e.etype.index() >= self.event_types.len() {
            return Err(TaggerError::UnknownEventType { etype: e.etype.index(), event_types: self.event_types.len() });
        }
        Ok(())
    }

    /// The state before the first event of a trace.
    pub fn init(&self) -> DecodingState {
        match &self.net.body {
            Body::Ma { lstm, .. } => DecodingState::Ma {
                h: lstm.iter().map(|l| vec![0.0; l.hidden]).collect(),
                c: lstm.iter().map(|l| vec![0.0; l.hidden]).collect(),
            },
            Body::Mb { .. } => DecodingState::Mb { buffer: VecDeque::new() },
        }
    }

    /// Distribution over activities for the next event; advances `state`.
    pub fn predict(&self, state: &mut DecodingState, e: &Event) -> Result<Vec<f64>, TaggerError> {
        self.check_event(e)?;
        let (p, l) = (&self.params, &self.net.layout);
        let w = self.net.width();
        let mut v = vec![0.0; w];
        self.net.encode(p, e, &mut v);
        let mut logits = match (&self.net.body, state) {
            (Body::Ma { lstm, head, .. }, DecodingState::Ma { h, c }) => {
                let mut x = Array2::from_shape_vec((1, w), v).expect("row");
                for (k, layer) in lstm.iter().enumerate() {
                    let hp = Array2::from_shape_vec((1, layer.hidden), std::mem::take(&mut h[k])).expect("row");
                    let cp = Array2::from_shape_vec((1, layer.hidden), std::mem::take(&mut c[k])).expect("row");
                    let (h2, c2, _) = layer.step(l, p, &x, &hp, &cp);
                    h[k] = h2.iter().copied().collect();
                    c[k] = c2.iter().copied().collect();
                    x = h2;
                }
                head.forward::<ChaCha8Rng>(l, p, x, None).0
            }
            (Body::Mb { window, mlp }, DecodingState::Mb { buffer }) => {
                let mut x = Array2::<f64>::zeros((1, window * w));
                let pad = window - 1 - buffer.len();
                for (k, past) in buffer.iter().enumerate() {
                    x.slice_mut(ndarray::s![0, (pad + k) * w..(pad + k + 1) * w]).assign(&ndarray::aview1(past));
                }
                x.slice_mut(ndarray::s![0, (window - 1) * w..]).assign(&ndarray::aview1(&v));
                if *window > 1 {
                    buffer.push_back(v);
                    if buffer.len() > window - 1 {
                        buffer.pop_front();
                    }
                }
                mlp.forward::<ChaCha8Rng>(l, p, x, None).0
            }
            _ => return Err(TaggerError::StateMismatch),
        };
        softmax_rows(&mut logits);
        Ok(logits.iter().copied().collect())
    }

    /// Predictions for every event of a trace from a fresh state.
    pub fn predict_trace(&self, events: &[Event]) -> Result<Vec<Vec<f64>>, TaggerError> {
        let mut st = self.init();
        events.iter().map(|e| self.predict(&mut st, e)).collect()
    }

    /// Fraction of events whose most probable activity is the label.
    pub fn accuracy(&self, data: &[LabeledSequence<'_>]) -> Result<f64, TaggerError> {
        let (mut hit, mut total) = (0usize, 0usize);
        for s in data {
            for (pd, y) in self.predict_trace(s.events)?.iter().zip(s.labels) {
                hit += usize::from(argmax(pd) == y.index());
                total += 1;
            }
        }
        Ok(if total == 0 { 0.0 } else { hit as f64 / total as f64 })
    }

    pub fn to_json(&self) -> String {
        let doc = TaggerDoc {
            v: TAGGER_FORMAT_VERSION,
            arch: self.arch.clone(),
            embedding: self.embedding.clone(),
            activities: self.activities.clone(),
            event_types: self.event_types.clone(),
            layout: self.net.layout.clone(),
            params: self.params.clone(),
            meta: self.meta.clone(),
        };
        serde_json::to_string(&doc).expect("tagger serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TaggerError> {
        let doc: TaggerDoc = serde_json::from_str(text).map_err(|e| TaggerError::Format(e.to_string()))?;
        if doc.v != TAGGER_FORMAT_VERSION {
            return Err(TaggerError::Format(format!("unsupported tagger format version {}", doc.v)));
        }
        let mut t = Tagger::with_names(doc.arch, doc.embedding, doc.activities, doc.event_types, doc.meta.seed)?;
        if t.net.layout != doc.layout || doc.params.len() != t.params.len() {
            return Err(TaggerError::Format("parameter layout does not match the architecture".into()));
        }
        if doc.params.iter().any(|v| !v.is_finite()) {
            return Err(TaggerError::Format("non-finite weight".into()));
        }
        t.params = doc.params;
        t.meta = doc.meta;
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<(), TaggerError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TaggerError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Index of the largest entry; ties go to the lower index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = k;
        }
    }
    best
}
