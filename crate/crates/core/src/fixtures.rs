//! The toy care-flow used throughout tests and examples.
//!
//! Trace: blood sample, blood pressure, temperature, cannula insertion. Three
//! activities: `A1` pre-hospitalization, `A2` pre-surgery, `A3` post-surgery.
//! Cannula insertion only happens during `A2`.

use crate::model::{parse_model, Knowledge, Trace};

/// Loose mapping: the three measurements may be any step of any activity.
pub const CARE_JSON: &str = r#"{
  "v": 1,
  "activities": ["A1", "A2", "A3"],
  "event_types": ["BloodSample", "BloodPressure", "Temperature", "CannulaInsertion"],
  "mapping": [
    {"event": "BloodSample", "activity": "A1", "steps": ["first", "intermediate", "last", "first_and_last"]},
    {"event": "BloodSample", "activity": "A2", "steps": ["first", "intermediate", "last", "first_and_last"]},
    {"event": "BloodSample", "activity": "A3", "steps": ["first", "intermediate", "last", "first_and_last"]},
    {"event": "BloodPressure", "activity": "A1", "steps": ["first", "intermediate", "last", "first_and_last"]},
    {"event": "BloodPressure", "activity": "A2", "steps": ["first", "intermediate", "last", "first_and_last"]},
    {"event": "BloodPressure", "activity": "A3", "steps": ["first", "intermediate", "last", "first_and_last"]},
    {"event": "Temperature", "activity": "A1", "steps": ["first", "intermediate", "last", "first_and_last"]},
    {"event": "Temperature", "activity": "A2", "steps": ["first", "intermediate", "last", "first_and_last"]},
    {"event": "Temperature", "activity": "A3", "steps": ["first", "intermediate", "last", "first_and_last"]},
    {"event": "CannulaInsertion", "activity": "A2", "steps": ["first", "intermediate", "last", "first_and_last"]}
  ],
  "start_activities": ["A1"],
  "max_instances": {"A1": 1, "A2": 1, "A3": 1},
  "constraints": []
}"#;

/// `A1` starts with a blood sample and ends with a blood-pressure measurement;
/// `A2` is immediately preceded by `A1` and is closed by the cannula insertion.
pub const CARE_RESTRICTED_JSON: &str = r#"{
  "v": 1,
  "activities": ["A1", "A2", "A3"],
  "event_types": ["BloodSample", "BloodPressure", "Temperature", "CannulaInsertion"],
  "mapping": [
    {"event": "BloodSample", "activity": "A1", "steps": ["first", "intermediate"]},
    {"event": "BloodSample", "activity": "A2", "steps": ["first", "intermediate", "last", "first_and_last"]},
    {"event": "BloodSample", "activity": "A3", "steps": ["first", "intermediate", "last", "first_and_last"]},
    {"event": "BloodPressure", "activity": "A1", "steps": ["intermediate", "last"]},
    {"event": "BloodPressure", "activity": "A2", "steps": ["first", "intermediate", "last", "first_and_last"]},
    {"event": "BloodPressure", "activity": "A3", "steps": ["first", "intermediate", "last", "first_and_last"]},
    {"event": "Temperature", "activity": "A1", "steps": ["intermediate"]},
    {"event": "Temperature", "activity": "A2", "steps": ["first", "intermediate", "last", "first_and_last"]},
    {"event": "Temperature", "activity": "A3", "steps": ["first", "intermediate", "last", "first_and_last"]},
    {"event": "CannulaInsertion", "activity": "A2", "steps": ["last", "first_and_last"]}
  ],
  "start_activities": ["A1"],
  "max_instances": {"A1": 1, "A2": 1, "A3": 1},
  "constraints": [
    {"kind": "precedence", "lhs": ["A1"], "rhs": ["A2"], "window": 1}
  ]
}"#;

pub fn care() -> Knowledge {
    parse_model(CARE_JSON).expect("care fixture parses")
}

pub fn care_restricted() -> Knowledge {
    parse_model(CARE_RESTRICTED_JSON).expect("restricted care fixture parses")
}

/// Loose care mapping where any activity may start the process.
pub fn care_open_start() -> Knowledge {
    let doc = CARE_JSON.replace(r#""start_activities": ["A1"]"#, r#""start_activities": ["A1", "A2", "A3"]"#);
    parse_model(&doc).expect("open-start fixture parses")
}

/// One activity and an event type nothing maps to.
pub fn unmapped_event() -> Knowledge {
    parse_model(
        r#"{"activities": ["a"], "event_types": ["x", "orphan"],
            "mapping": [{"event": "x", "activity": "a", "steps": ["first", "last", "first_and_last"]}],
            "start_activities": ["a"], "max_instances": {"a": 2}, "constraints": []}"#,
    )
    .expect("unmapped fixture parses")
}

pub const EXAMPLE_EVENTS: [&str; 4] = ["BloodSample", "BloodPressure", "Temperature", "CannulaInsertion"];

/// The four-event example trace over `k`'s event vocabulary.
pub fn example_trace(k: &Knowledge, finalized: bool) -> Trace {
    let types: Vec<_> = EXAMPLE_EVENTS.iter().map(|n| k.mapping.event_type(n).expect("care event type")).collect();
    Trace::from_types("example-1", &types, finalized)
}
