//! Labelled trace collections and their line-delimited JSON files.
//!
//! One trace per line:
//! `{"v":1,"id":..,"events":[{"type":..,"attrs":{..}}],"labels":[{"activity":..,"step":..,"instance":..}],"finalized":true}`.
//! A sidecar manifest records the generating spec, seed, census and checksums.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{serialize_model, ActivityId, Assignment, AttrValue, Event, Interpretation, Knowledge, StepType, Trace};

use super::{derive_seed, generate_trace, GenConfig, SynthError};

pub const DATASET_FORMAT_VERSION: u32 = 1;

/// A trace with its ground-truth interpretation.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTrace {
    pub trace: Trace,
    pub labels: Interpretation,
}

impl LabeledTrace {
    pub fn len(&self) -> usize {
        self.trace.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trace.is_empty()
    }

    /// The ground-truth activity of every event.
    pub fn activities(&self) -> Vec<ActivityId> {
        self.labels.0.iter().map(|x| x.activity).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub traces: Vec<LabeledTrace>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn event_count(&self) -> usize {
        self.traces.iter().map(LabeledTrace::len).sum()
    }

    /// Seeded split into `(train, test)`; every trace length contributes
    /// `floor(count · test_fraction)` traces to the test part. Order is kept.
    pub fn split(&self, test_fraction: f64, seed: u64) -> (Dataset, Dataset) {
        let mut by_len: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (n, t) in self.traces.iter().enumerate() {
            by_len.entry(t.len()).or_default().push(n);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut test = vec![false; self.traces.len()];
        for ids in by_len.values() {
            let take = (ids.len() as f64 * test_fraction).floor() as usize;
            for &n in ids.choose_multiple(&mut rng, take) {
                test[n] = true;
            }
        }
        let (mut a, mut b) = (Dataset::default(), Dataset::default());
        for (t, is_test) in self.traces.iter().zip(test) {
            if is_test { &mut b } else { &mut a }.traces.push(t.clone());
        }
        (a, b)
    }

    /// A seeded random `percent`% of the traces (rounded), in their original order;
    /// 100 returns everything.
    pub fn subsample(&self, percent: u32, seed: u64) -> Dataset {
        let n = ((self.traces.len() * percent.min(100) as usize) as f64 / 100.0).round() as usize;
        let mut ids: Vec<usize> = (0..self.traces.len()).collect();
        if n < ids.len() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            ids = ids.choose_multiple(&mut rng, n).copied().collect();
            ids.sort_unstable();
        }
        Dataset { traces: ids.into_iter().map(|n| self.traces[n].clone()).collect() }
    }

    /// Ground-truth activities per trace, parallel to `traces`.
    pub fn activity_labels(&self) -> Vec<Vec<ActivityId>> {
        self.traces.iter().map(LabeledTrace::activities).collect()
    }
}

/// How many traces of each length, and the seed they derive from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSpec {
    /// `(length, count)` pairs, generated in this order.
    pub lengths: Vec<(usize, usize)>,
    pub seed: u64,
    #[serde(default)]
    pub generator: GenConfig,
}

/// Generates every trace of `spec`; trace `n` uses its own rng seeded from
/// `(spec.seed, n)`, so the result does not depend on scheduling.
pub fn generate_dataset(k: &Knowledge, spec: &DatasetSpec) -> Result<Dataset, SynthError> {
    let jobs: Vec<(usize, usize)> =
        spec.lengths.iter().flat_map(|&(len, count)| std::iter::repeat_n(len, count)).enumerate().collect();
    let traces = jobs
        .par_iter()
        .map(|&(n, len)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, n as u64));
            let (mut trace, labels) = generate_trace(k, len, &spec.generator, &mut rng)?;
            trace.id = format!("syn-{len}-{n:06}");
            Ok(LabeledTrace { trace, labels })
        })
        .collect::<Result<Vec<_>, SynthError>>()?;
    Ok(Dataset { traces })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceDoc {
    v: u32,
    id: String,
    events: Vec<EventDoc>,
    labels: Vec<LabelDoc>,
    finalized: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventDoc {
    #[serde(rename = "type")]
    etype: String,
    #[serde(default)]
    attrs: BTreeMap<String, AttrValue>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelDoc {
    activity: String,
    step: StepType,
    instance: u32,
}

/// Sidecar written next to a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub v: u32,
    pub spec: DatasetSpec,
    pub traces: usize,
    pub events: usize,
    /// Trace count per length.
    pub by_length: BTreeMap<usize, usize>,
    pub dataset_sha256: String,
    pub model_sha256: String,
}

impl Manifest {
    /// `data.jsonl` → `data.manifest.json`.
    pub fn path_for(dataset: &Path) -> PathBuf {
        dataset.with_extension("manifest.json")
    }
}

fn encode_line(k: &Knowledge, t: &LabeledTrace) -> String {
    let doc = TraceDoc {
        v: DATASET_FORMAT_VERSION,
        id: t.trace.id.clone(),
        events: t
            .trace
            .events
            .iter()
            .map(|e| EventDoc {
                etype: k.mapping.event_type_name(e.etype).to_string(),
                attrs: e.attrs.iter().cloned().collect(),
            })
            .collect(),
        labels: t
            .labels
            .0
            .iter()
            .map(|x| LabelDoc { activity: k.mapping.activity_name(x.activity).to_string(), step: x.step, instance: x.instance })
            .collect(),
        finalized: t.trace.finalized,
    };
    serde_json::to_string(&doc).expect("dataset records serialize")
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes the dataset and its manifest; returns the manifest.
pub fn write_dataset(path: &Path, k: &Knowledge, ds: &Dataset, spec: &DatasetSpec) -> Result<Manifest, SynthError> {
    let mut body = String::new();
    for t in &ds.traces {
        body.push_str(&encode_line(k, t));
        body.push('\n');
    }
    fs::write(path, &body)?;
    let mut by_length = BTreeMap::new();
    for t in &ds.traces {
        *by_length.entry(t.len()).or_insert(0) += 1;
    }
    let manifest = Manifest {
        v: DATASET_FORMAT_VERSION,
        spec: spec.clone(),
        traces: ds.len(),
        events: ds.event_count(),
        by_length,
        dataset_sha256: sha256_hex(body.as_bytes()),
        model_sha256: sha256_hex(serialize_model(k).as_bytes()),
    };
    let mut f = fs::File::create(Manifest::path_for(path))?;
    f.write_all(serde_json::to_string_pretty(&manifest).expect("manifest serializes").as_bytes())?;
    f.write_all(b"\n")?;
    Ok(manifest)
}

/// Reads a dataset file, resolving names against `k`.
pub fn read_dataset(path: &Path, k: &Knowledge) -> Result<Dataset, SynthError> {
    let text = fs::read_to_string(path)?;
    parse_dataset(&text, k)
}

pub(crate) fn parse_dataset(text: &str, k: &Knowledge) -> Result<Dataset, SynthError> {
    let mut traces = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let locus = |m: String| SynthError::Format { locus: format!("line {}", n + 1), message: m };
        let doc: TraceDoc = serde_json::from_str(line).map_err(|e| locus(e.to_string()))?;
        if doc.v != DATASET_FORMAT_VERSION {
            return Err(locus(format!("unsupported dataset format version {}", doc.v)));
        }
        if doc.labels.len() != doc.events.len() {
            return Err(locus("labels and events differ in length".into()));
        }
        let mut events = Vec::with_capacity(doc.events.len());
        for (i, e) in doc.events.into_iter().enumerate() {
            let etype = k.mapping.event_type(&e.etype).map_err(|e| locus(e.to_string()))?;
            events.push(Event { index: i + 1, etype, attrs: e.attrs.into_iter().collect() });
        }
        let mut labels = Vec::with_capacity(doc.labels.len());
        for l in doc.labels {
            let a = k.mapping.activity(&l.activity).map_err(|e| locus(e.to_string()))?;
            labels.push(Assignment::new(a, l.step, l.instance));
        }
        traces.push(LabeledTrace {
            trace: Trace { id: doc.id, events, finalized: doc.finalized },
            labels: Interpretation(labels),
        });
    }
    Ok(Dataset { traces })
}
