//! The blood-sample trace under the restricted care model: which readings
//! the reasoner accepts, boolean and wildcard queries, and why a reading is
//! rejected — cross-checked against the interpretation oracle.
//!
//! cargo run --example example_one

use std::sync::Arc;

use procsift::fixtures::{care_restricted, example_trace};
use procsift::model::{validate_interpretation, Assignment, Interpretation, StepType};
use procsift::reasoner::{Query, Session};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let k = Arc::new(care_restricted());
    let trace = example_trace(&k, false);
    let (a1, a2) = (k.mapping.activity("A1")?, k.mapping.activity("A2")?);

    let mut session = Session::new(Arc::clone(&k));
    for e in &trace.events {
        session.update_aaf(e, &k.mapping.cand_act(e.etype)?)?;
        let accepted: Vec<String> = session
            .accepted(e.index)?
            .iter()
            .map(|x| format!("{}/{}#{}", k.mapping.activity_name(x.activity), x.step, x.instance))
            .collect();
        println!("e{} {:<16} accepted: {}", e.index, k.mapping.event_type_name(e.etype), accepted.join(" "));
    }

    println!("\nis e4 the closing of A2's first instance? {:?}", session.answer(&Query::exact(4, a2, StepType::Last, 1))?);
    println!("readings of e4 as A1: {:?}", session.answer(&Query::any(4, a1))?);
    println!("why not A1 at e4: {:?}", session.explain_activity(4, a1)?.reasons);
    println!("why not A1 closing at e3: {:?}", session.explain(&Query::exact(3, a1, StepType::Last, 1))?);

    // The same story, told by the oracle over whole interpretations.
    let i1 = Interpretation(vec![
        Assignment::new(a1, StepType::First, 1),
        Assignment::new(a1, StepType::Intermediate, 1),
        Assignment::new(a1, StepType::Last, 1),
        Assignment::new(a2, StepType::FirstAndLast, 1),
    ]);
    let i2 = Interpretation(vec![
        Assignment::new(a1, StepType::First, 1),
        Assignment::new(a1, StepType::Last, 1),
        Assignment::new(a2, StepType::First, 1),
        Assignment::new(a2, StepType::Last, 1),
    ]);
    println!("\nI1: {:?}", validate_interpretation(&trace, &i1, &k.mapping, &k.model));
    println!("I2: {:?}", validate_interpretation(&trace, &i2, &k.mapping, &k.model));
    Ok(())
}
