//! Property checks for one pipeline run, each against an independent replay.

use std::collections::BTreeSet;
use std::sync::Arc;

use procsift::model::{ActivityId, Event, Knowledge, Trace};
use procsift::pipeline::{analyze_trace, Analysis, PipelineConfig, Predictor, Scripted, StepResult};
use procsift::reasoner::{ArgKind, InterpArg, Session};

use super::naive_aaf::XorShift;

/// Random distributions, some of them peaked, some with exact zeros.
pub fn random_script(rng: &mut XorShift, activities: usize, len: usize) -> Scripted {
    let by_index = (0..len)
        .map(|_| {
            let mut d: Vec<f64> = (0..activities)
                .map(|_| match rng.below(4) {
                    0 => 0.0,
                    1 => 10.0 * (1 + rng.below(10)) as f64,
                    _ => (1 + rng.below(10)) as f64,
                })
                .collect();
            let s: f64 = d.iter().sum();
            if s == 0.0 {
                d[rng.below(activities as u64) as usize] = 1.0;
            } else {
                d.iter_mut().for_each(|x| *x /= s);
            }
            d
        })
        .collect();
    Scripted { activities, by_index }
}

/// A session holding `events`, the last one read with `last`, the earlier ones with their beams.
fn replay(k: &Arc<Knowledge>, events: &[Event], beams: &[Vec<ActivityId>], last: &[ActivityId]) -> Session {
    let mut s = Session::new(Arc::clone(k));
    for (e, b) in events.iter().zip(beams) {
        s.update_aaf(e, b).unwrap();
    }
    s.update_aaf(&events[beams.len()], last).unwrap();
    s
}

fn accepted_all(s: &Session) -> Result<BTreeSet<InterpArg>, String> {
    let mut out = BTreeSet::new();
    for i in 1..=s.len() {
        out.extend(s.accepted(i).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

/// Runs `predictor` over `trace` and checks, per event: the distribution,
/// support ⊆ cand_act ∩ valid, the beam size, the validity set against a
/// replay with the mapping's candidates, restriction monotonicity, the
/// snapshot discipline, and finally incremental = batch. Returns the number
/// of events checked and how many of them kept a non-empty support.
pub fn check_run<P: Predictor>(
    k: &Arc<Knowledge>,
    predictor: &P,
    trace: &Trace,
    cfg: &PipelineConfig,
) -> Result<(usize, usize), String> {
    let mut an = Analysis::new(Arc::clone(k), predictor, cfg.clone()).map_err(|e| e.to_string())?;
    let kk = cfg.resolved_k(&k.mapping);
    let mut beams: Vec<Vec<ActivityId>> = Vec::new();
    let mut results: Vec<StepResult> = Vec::new();
    for (i, e) in trace.events.iter().enumerate() {
        let at = |m: String| format!("event {}: {m}", e.index);
        let before = an.session().framework().clone();
        let r = an.process_event(e).map_err(|x| at(x.to_string()))?;
        if r.unresolved {
            return Err(at("unexpected overflow".into()));
        }
        // Distribution.
        let total: f64 = r.ranked.iter().map(|x| x.probability).sum();
        if r.deviation != r.ranked.is_empty() || (!r.ranked.is_empty() && (total - 1.0).abs() > 1e-9) {
            return Err(at(format!("not a distribution: {:?}", r.ranked)));
        }
        if r.ranked.windows(2).any(|w| w[0].probability < w[1].probability || (w[0].probability == w[1].probability && w[0].activity > w[1].activity)) {
            return Err(at(format!("ranking out of order: {:?}", r.ranked)));
        }
        // Support and beam size.
        let cand = k.mapping.cand_act(e.etype).unwrap();
        let support = r.support();
        if support.len() > kk || support.iter().any(|a| !cand.contains(a) || !r.valid.contains(a)) {
            return Err(at(format!("support {support:?} vs cand {cand:?}, valid {:?}, k {kk}", r.valid)));
        }
        // Validity against an independent replay of the unrestricted step.
        let wide = replay(k, &trace.events[..=i], &beams, &cand);
        let wide_valid: Vec<ActivityId> = {
            let mut v: Vec<ActivityId> = wide.accepted(e.index).unwrap().iter().map(|x| x.activity).collect();
            v.dedup();
            v
        };
        if wide_valid != r.valid {
            return Err(at(format!("valid {:?}, replay {wide_valid:?}", r.valid)));
        }
        // The restricted framework equals a replay with the beam, and invents no acceptance.
        let narrow = replay(k, &trace.events[..=i], &beams, &support);
        let got = accepted_all(an.session())?;
        if got != accepted_all(&narrow)? {
            return Err(at("restricted framework differs from a fresh replay".into()));
        }
        let wide_acc = accepted_all(&wide)?;
        if let Some(x) = got.iter().find(|x| !wide_acc.contains(x)) {
            return Err(at(format!("beam restriction invented {x:?}")));
        }
        // Snapshot discipline: the old framework survives as a prefix, new readings sit at this event.
        let after = an.session().framework();
        if after.len() < before.len() || before.args().any(|a| after.tag(a) != before.tag(a)) {
            return Err(at("earlier arguments changed".into()));
        }
        let old_attacks: Vec<_> = after.attack_pairs().filter(|(x, y)| x.index() < before.len() && y.index() < before.len()).collect();
        if old_attacks != before.attack_pairs().collect::<Vec<_>>() {
            return Err(at("attacks among earlier arguments changed".into()));
        }
        let new_readings = after.args().skip(before.len()).filter(|&a| matches!(after.tag(a), ArgKind::Interp(_)));
        for a in new_readings {
            if let ArgKind::Interp(x) = after.tag(a) {
                if x.index != e.index || !support.contains(&x.activity) {
                    return Err(at(format!("stray reading {x:?}")));
                }
            }
        }
        beams.push(support);
        results.push(r);
    }
    let batch = analyze_trace(Arc::clone(k), predictor, &trace.events, cfg).map_err(|e| e.to_string())?;
    if batch != results {
        return Err("batch run differs from the incremental one".into());
    }
    Ok((trace.len(), results.iter().filter(|r| !r.deviation).count()))
}
