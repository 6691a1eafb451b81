//! Finite-difference verification of the hand-written backward passes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Event, EventTypeId};

use super::{ArchSpec, Body, EmbeddingConfig, Tagger, TaggerError};

/// Step for central differences.
const H: f64 = 1e-4;
/// Gradients smaller than this are compared absolutely: below it the
/// difference quotient is dominated by rounding, not by the derivative.
const FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    /// max over parameters of |analytic − numeric| / max(|analytic|, |numeric|, 1e-6).
    pub max_rel_error: f64,
    /// Parameter with the largest error, as `block[index]`.
    pub worst: String,
    pub params_checked: usize,
    pub loss: f64,
}

/// Compares analytic gradients with central differences (h = 1e-4) on a
/// random batch for a tagger with `arch` over 3 activities and 4 event
/// types. Dropout is off. Use small layer sizes: every parameter is checked.
pub fn gradient_check(arch: &ArchSpec, embedding: &EmbeddingConfig, seed: u64) -> Result<GradientReport, TaggerError> {
    let names = |p: &str, n: usize| (0..n).map(|k| format!("{p}{k}")).collect::<Vec<_>>();
    let t = Tagger::with_names(arch.clone(), embedding.clone(), names("A", 3), names("e", 4), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let (batch, len) = (3, 5);
    let traces: Vec<Vec<Event>> = (0..batch)
        .map(|_| (1..=len).map(|i| Event::new(i, EventTypeId(rng.gen_range(0..4)))).collect())
        .collect();
    let targets: Vec<Vec<usize>> = (0..batch).map(|_| (0..len).map(|_| rng.gen_range(0..3)).collect()).collect();

    let loss = |p: &[f64], g: Option<&mut [f64]>| -> f64 {
        match &t.net.body {
            Body::Mb { .. } => {
                let items: Vec<(&[Event], usize)> =
                    traces.iter().flat_map(|tr| (0..len).map(move |i| (tr.as_slice(), i))).collect();
                let flat: Vec<usize> = targets.iter().flatten().copied().collect();
                t.net.window_loss(p, g, &items, &flat, None)
            }
            Body::Ma { .. } => {
                let tr: Vec<&[Event]> = traces.iter().map(Vec::as_slice).collect();
                let tg: Vec<&[usize]> = targets.iter().map(Vec::as_slice).collect();
                t.net.sequence_loss(p, g, &tr, &tg, None)
            }
        }
    };

    let mut p = t.params.clone();
    let mut g = vec![0.0; p.len()];
    let l0 = loss(&p, Some(&mut g));
    let mut report = GradientReport { max_rel_error: 0.0, worst: String::new(), params_checked: p.len(), loss: l0 };
    for b in &t.net.layout.blocks {
        for k in 0..b.rows * b.cols {
            let j = b.offset + k;
            let orig = p[j];
            p[j] = orig + H;
            let up = loss(&p, None);
            p[j] = orig - H;
            let down = loss(&p, None);
            p[j] = orig;
            let numeric = (up - down) / (2.0 * H);
            let err = (g[j] - numeric).abs() / g[j].abs().max(numeric.abs()).max(FLOOR);
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = format!("{}[{k}]", b.name);
            }
        }
    }
    Ok(report)
}
