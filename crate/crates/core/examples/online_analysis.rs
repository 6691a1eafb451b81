//! Online interpretation of a trace: a predictor's distribution filtered by
//! the reasoner, smoothed, cut to the top k and fed back into the framework
//! event by event; then the trace is closed and re-checked.
//!
//! cargo run --example online_analysis

use std::sync::Arc;

use procsift::fixtures::{care_restricted, example_trace};
use procsift::pipeline::{Analysis, PipelineConfig, Scripted};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let k = Arc::new(care_restricted());
    let trace = example_trace(&k, true);
    let n = k.activity_count();

    // A confident but wrong predictor: it believes every event belongs to A3.
    let stubborn = Scripted { activities: n, by_index: vec![vec![0.05, 0.05, 0.9]; trace.len()] };
    for kk in [None, Some(1)] {
        let cfg = PipelineConfig { k: kk, ..PipelineConfig::default() };
        let mut analysis = Analysis::new(Arc::clone(&k), &stubborn, cfg)?;
        println!("beam k = {}", analysis.k());
        for e in &trace.events {
            let r = analysis.process_event(e)?;
            let ranked: Vec<String> =
                r.ranked.iter().map(|x| format!("{} {:.3}", k.mapping.activity_name(x.activity), x.probability)).collect();
            let valid: Vec<&str> = r.valid.iter().map(|&a| k.mapping.activity_name(a)).collect();
            println!("  e{} {:<16} -> {:<28} valid {valid:?}", e.index, k.mapping.event_type_name(e.etype), ranked.join(", "));
        }
        let summary = analysis.finalize()?;
        println!("  closed: {} readings accepted overall, inconsistent events {:?}", summary.events.iter().map(|s| s.accepted.len()).sum::<usize>(), summary.inconsistent);
    }
    Ok(())
}
