//! Differential check of the reasoner against the exhaustive interpretation oracle.

use std::collections::BTreeSet;
use std::sync::Arc;

use procsift::aaf::{preferred_extensions, Budget};
use procsift::model::{enumerate_valid, Interpretation, Knowledge, Trace};
use procsift::reasoner::{ArgKind, InterpArg, Session};

pub const ENUMERATION_BUDGET: u64 = 2_000_000;

pub enum Outcome {
    Agree { valid: usize },
    /// The oracle could not enumerate within its budget.
    Skipped,
}

pub fn session_for(k: &Arc<Knowledge>, trace: &Trace) -> Session {
    let mut s = Session::new(Arc::clone(k));
    for e in &trace.events {
        s.update_aaf(e, &k.mapping.cand_act(e.etype).unwrap()).unwrap();
    }
    if trace.finalized {
        s.finalize().unwrap();
    }
    s
}

fn as_args(i: &Interpretation) -> BTreeSet<InterpArg> {
    i.0.iter()
        .enumerate()
        .map(|(k, x)| InterpArg { index: k + 1, activity: x.activity, step: x.step, instance: x.instance })
        .collect()
}

/// Compares per-event credulous acceptance with the projection of the valid
/// interpretations, and (if `extensions`) the preferred extensions restricted to
/// interpretation arguments with the valid interpretations themselves.
pub fn check(k: &Arc<Knowledge>, trace: &Trace, extensions: bool) -> Result<Outcome, String> {
    let Ok(valid) = enumerate_valid(trace, &k.mapping, &k.model, ENUMERATION_BUDGET) else {
        return Ok(Outcome::Skipped);
    };
    let s = session_for(k, trace);
    for idx in 1..=trace.len() {
        let expected: BTreeSet<InterpArg> = valid.iter().map(|i| as_args(i)).flat_map(|set| set.into_iter().filter(move |x| x.index == idx)).collect();
        let got: BTreeSet<InterpArg> = s.accepted(idx).map_err(|e| e.to_string())?.into_iter().collect();
        if expected != got {
            return Err(format!("event {idx}: reasoner {got:?}, oracle {expected:?}"));
        }
    }
    if extensions {
        let pref = preferred_extensions(s.framework(), Budget::default()).map_err(|e| e.to_string())?;
        let restricted: BTreeSet<BTreeSet<InterpArg>> = pref
            .iter()
            .map(|ext| {
                ext.iter()
                    .filter_map(|&a| match s.framework().tag(a) {
                        ArgKind::Interp(x) => Some(*x),
                        _ => None,
                    })
                    .collect()
            })
            .collect();
        let mut expected: BTreeSet<BTreeSet<InterpArg>> = valid.iter().map(as_args).collect();
        if expected.is_empty() {
            expected.insert(BTreeSet::new());
        }
        if restricted != expected {
            return Err(format!("extensions {restricted:?} != valid interpretations {expected:?}"));
        }
    }
    Ok(Outcome::Agree { valid: valid.len() })
}
