//! Event → vector encoding.

use serde::{Deserialize, Serialize};

use crate::model::{AttrValue, Event};

/// How the event type becomes part of the event vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TypeEncoding {
    OneHot,
    /// A trainable lookup table with rows of width `dim`.
    Learned { dim: usize },
}

/// A numeric attribute scaled to `[0, 1]` by its dataset range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericField {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

impl NumericField {
    /// Missing or non-numeric values encode as 0; values are clamped to the range.
    fn encode(&self, e: &Event) -> f64 {
        let v = e.attrs.iter().find(|(k, _)| *k == self.name).and_then(|(_, v)| match v {
            AttrValue::Num(x) => Some(*x),
            AttrValue::Cat(_) => None,
        });
        match v {
            Some(x) if self.max > self.min => ((x - self.min) / (self.max - self.min)).clamp(0.0, 1.0),
            Some(_) => 1.0,
            None => 0.0,
        }
    }
}

/// Field-wise event encoding; the event vector is the concatenation of the field encodings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub event_type: TypeEncoding,
    #[serde(default)]
    pub numeric: Vec<NumericField>,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig { event_type: TypeEncoding::Learned { dim: 4 }, numeric: Vec::new() }
    }
}

impl EmbeddingConfig {
    pub fn one_hot() -> Self {
        EmbeddingConfig { event_type: TypeEncoding::OneHot, numeric: Vec::new() }
    }

    /// Adds min-max scaled numeric fields with ranges taken from `events`.
    pub fn with_numeric<'a>(mut self, names: &[&str], events: impl IntoIterator<Item = &'a Event>) -> Self {
        let mut fields: Vec<NumericField> =
            names.iter().map(|n| NumericField { name: n.to_string(), min: f64::INFINITY, max: f64::NEG_INFINITY }).collect();
        for e in events {
            for f in &mut fields {
                if let Some((_, AttrValue::Num(x))) = e.attrs.iter().find(|(k, _)| *k == f.name) {
                    f.min = f.min.min(*x);
                    f.max = f.max.max(*x);
                }
            }
        }
        for f in &mut fields {
            if !f.min.is_finite() {
                f.min = 0.0;
                f.max = 0.0;
            }
        }
        self.numeric.extend(fields);
        self
    }

    /// Width of the event-type part.
    pub fn type_width(&self, event_types: usize) -> usize {
        match self.event_type {
            TypeEncoding::OneHot => event_types,
            TypeEncoding::Learned { dim } => dim,
        }
    }

    /// Length of every event vector.
    pub fn width(&self, event_types: usize) -> usize {
        self.type_width(event_types) + self.numeric.len()
    }

    /// Writes the event vector into `out` (length [`EmbeddingConfig::width`]);
    /// `table` is the learned lookup table, row-major, ignored for one-hot.
    pub(crate) fn encode_into(&self, e: &Event, event_types: usize, table: &[f64], out: &mut [f64]) {
        let tw = self.type_width(event_types);
        let t = e.etype.index();
        match self.event_type {
            TypeEncoding::OneHot => {
                out[..tw].fill(0.0);
                out[t] = 1.0;
            }
            TypeEncoding::Learned { dim } => out[..tw].copy_from_slice(&table[t * dim..(t + 1) * dim]),
        }
        for (k, f) in self.numeric.iter().enumerate() {
            out[tw + k] = f.encode(e);
        }
    }
}
