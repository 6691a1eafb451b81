use std::sync::Arc;

use super::wire::*;
use super::*;
use crate::fixtures::{care_restricted, EXAMPLE_EVENTS};
use crate::model::StepType;

fn spec(config: ApiConfig) -> SessionSpec {
    SessionSpec { knowledge: Arc::new(care_restricted()), model: "care".into(), tagger: None, config }
}

fn event(name: &str) -> ApiEvent {
    ApiEvent { etype: name.into(), attrs: Default::default(), index: None }
}

fn example(journal: Option<Journal>) -> LiveSession {
    let mut live = LiveSession::new("s".into(), spec(ApiConfig::default()), journal).unwrap();
    for name in EXAMPLE_EVENTS {
        live.push(&event(name)).unwrap();
    }
    live
}

fn query(index: usize, activity: &str, reading: Option<(StepType, u32)>) -> ApiQuery {
    ApiQuery {
        v: API_VERSION,
        index,
        activity: activity.into(),
        step: reading.map(|r| r.0),
        instance: reading.map(|r| r.1),
        semantics: Default::default(),
    }
}

#[test]
fn example_session_answers() {
    let live = example(None);
    let last = &live.steps()[3];
    assert_eq!(last.event_type, "CannulaInsertion");
    assert_eq!(last.top.as_deref(), Some("A2"));
    assert_eq!(last.ranked.len(), 1);
    assert_eq!(last.valid, vec!["A2"]);

    let yes = live.query(&query(4, "A2", Some((StepType::Last, 1)))).unwrap();
    assert_eq!((yes.verdict, yes.readings), (Some(true), None));
    let none = live.query(&query(4, "A1", None)).unwrap();
    assert_eq!((none.verdict, none.readings), (None, Some(vec![])));

    let why = live.explain(&ApiExplain { v: 1, index: 4, activity: "A1".into(), step: None, instance: None }).unwrap();
    assert_eq!(why.reasons, vec![ApiReason::MappingViolation]);
    assert!(!why.accepted);
    let fine = live.explain(&ApiExplain { v: 1, index: 4, activity: "A2".into(), step: Some(StepType::Last), instance: Some(1) });
    assert!(fine.unwrap().accepted);
}

#[test]
fn client_errors_leave_the_session_unchanged() {
    let mut live = example(None);
    let before = live.state();
    fn bad<T>(r: Result<T, ServiceError>) -> bool {
        matches!(r, Err(ServiceError::BadRequest(_)))
    }
    assert!(bad(live.push(&event("Nope"))));
    assert!(bad(live.push(&ApiEvent { index: Some(9), ..event("Temperature") })));
    assert!(bad(live.query(&query(5, "A2", None))));
    assert!(bad(live.query(&query(0, "A2", None))));
    assert!(bad(live.query(&query(1, "A9", None))));
    assert!(bad(live.query(&ApiQuery { v: 2, ..query(1, "A1", None) })));
    assert!(bad(live.explain(&ApiExplain { v: 1, index: 1, activity: "A1".into(), step: Some(StepType::First), instance: None })));
    assert_eq!(live.state(), before);
    live.finalize().unwrap();
    assert!(bad(live.push(&event("Temperature"))));
}

#[test]
fn finalize_is_idempotent() {
    let mut live = example(None);
    let s = live.finalize().unwrap();
    assert!(s.inconsistent.is_empty());
    assert_eq!(s.events.len(), 4);
    assert_eq!(live.finalize().unwrap(), s);
    assert!(live.state().finalized);
}

#[test]
fn journal_replays_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.jsonl");
    let mut live = example(Some(Journal::create(&path).unwrap()));
    live.finalize().unwrap();
    assert!(Journal::create(&path).is_err(), "journals are never overwritten");
    let entries = read_journal(&path).unwrap();
    assert_eq!(entries.len(), 1 + 4 + 1);
    let again = replay(&entries, None).unwrap();
    assert_eq!(again.steps(), live.steps());
    assert_eq!(again.summary(), live.summary());

    let mut forged = entries.clone();
    if let JournalEntry::Event { result, .. } = &mut forged[4] {
        result.top = Some("A1".into());
    }
    assert!(matches!(replay(&forged, None), Err(ServiceError::BadRequest(m)) if m.contains("entry 5")));
    assert!(replay(&entries[1..], None).is_err());
}

#[test]
fn exhausted_budget_is_an_overflow() {
    let mut live = LiveSession::new("s".into(), spec(ApiConfig { budget: Some(0), ..Default::default() }), None).unwrap();
    let step = live.push(&event("BloodSample")).unwrap();
    assert!(step.unresolved);
    let r = live.query(&query(1, "A1", None));
    assert!(matches!(r, Err(ServiceError::Overflow(_))), "{r:?}");
}

#[test]
fn wire_shapes() {
    let live = example(None);
    let step = serde_json::to_value(&live.steps()[3]).unwrap();
    assert_eq!(step["v"], 1);
    assert_eq!(step["ranked"][0]["activity"], "A2");
    let why = live.explain(&ApiExplain { v: 1, index: 4, activity: "A1".into(), step: None, instance: None }).unwrap();
    assert_eq!(serde_json::to_value(&why).unwrap()["reasons"][0]["kind"], "mapping_violation");
    let q: ApiQuery = serde_json::from_str(r#"{"index": 4, "activity": "A2", "step": "last", "instance": 1}"#).unwrap();
    assert_eq!((q.v, q.step), (1, Some(StepType::Last)));
    assert!(serde_json::from_str::<ApiQuery>(r#"{"index": 4, "activity": "A2", "colour": 1}"#).is_err());
    let c: CreateSession = serde_json::from_str(r#"{"model": "care", "config": {"k": 2}}"#).unwrap();
    assert_eq!(c.config.pipeline().k, Some(2));
    assert_eq!(c.config.pipeline().gamma, 0.001);
}
