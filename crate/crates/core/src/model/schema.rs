//! JSON model files.
//!
//! `max_instances` and `window` use `0` for "unbounded". The canonical form
//! sorts object keys and every list except `activities` and `event_types`,
//! whose order fixes the dense ids.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    ActivityId, Constraint, ConstraintKind, DeclarativeModel, EventTypeId, Knowledge, ModelError, StepType,
    TypeLevelMapping, Universe, Window,
};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    #[serde(default)]
    v: Option<u32>,
    activities: Vec<String>,
    event_types: Vec<String>,
    mapping: Vec<MappingDoc>,
    start_activities: Vec<String>,
    max_instances: BTreeMap<String, u32>,
    #[serde(default)]
    constraints: Vec<ConstraintDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MappingDoc {
    event: String,
    activity: String,
    steps: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintDoc {
    kind: String,
    lhs: Vec<String>,
    rhs: Vec<String>,
    window: u32,
}

/// Parses a model document into mapping and process model.
pub fn parse_model(doc: &str) -> Result<Knowledge, ModelError> {
    let raw: ModelDoc = serde_json::from_str(doc)
        .map_err(|e| ModelError::parse(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
    if let Some(v) = raw.v {
        if v != MODEL_FORMAT_VERSION {
            return Err(ModelError::parse("v", format!("unsupported model format version {v}")));
        }
    }
    let activities = Universe::new(raw.activities.iter().cloned())
        .map_err(|n| ModelError::parse("activities", format!("duplicate activity `{n}`")))?;
    let event_types = Universe::new(raw.event_types.iter().cloned())
        .map_err(|n| ModelError::parse("event_types", format!("duplicate event type `{n}`")))?;

    let act = |name: &str, locus: &str| -> Result<ActivityId, ModelError> {
        activities
            .lookup(name)
            .map(|i| ActivityId(i as u16))
            .ok_or_else(|| ModelError::parse(locus, format!("unknown activity `{name}`")))
    };

    let mut triples = Vec::new();
    for (i, m) in raw.mapping.iter().enumerate() {
        let e = event_types
            .lookup(&m.event)
            .map(|i| EventTypeId(i as u16))
            .ok_or_else(|| ModelError::parse(format!("mapping[{i}].event"), format!("unknown event type `{}`", m.event)))?;
        let a = act(&m.activity, &format!("mapping[{i}].activity"))?;
        if m.steps.is_empty() {
            return Err(ModelError::parse(format!("mapping[{i}].steps"), "at least one step type required"));
        }
        for (k, s) in m.steps.iter().enumerate() {
            let s = StepType::from_name(s)
                .ok_or_else(|| ModelError::parse(format!("mapping[{i}].steps[{k}]"), format!("unknown step type `{s}`")))?;
            triples.push((e, a, s));
        }
    }

    let mut start = Vec::new();
    for (i, s) in raw.start_activities.iter().enumerate() {
        start.push(act(s, &format!("start_activities[{i}]"))?);
    }
    if start.is_empty() {
        return Err(ModelError::parse("start_activities", "start activities must be non-empty"));
    }

    for name in raw.max_instances.keys() {
        act(name, &format!("max_instances.{name}"))?;
    }
    let mut max_inst = Vec::with_capacity(activities.len());
    for name in activities.names() {
        let v = raw
            .max_instances
            .get(name)
            .ok_or_else(|| ModelError::parse("max_instances", format!("missing bound for activity `{name}`")))?;
        max_inst.push(if *v == 0 { None } else { Some(*v) });
    }

    let mut constraints = Vec::new();
    for (i, c) in raw.constraints.iter().enumerate() {
        let locus = format!("constraints[{i}]");
        let kind = ConstraintKind::from_name(&c.kind)
            .ok_or_else(|| ModelError::parse(format!("{locus}.kind"), format!("unknown constraint kind `{}`", c.kind)))?;
        let lhs = c
            .lhs
            .iter()
            .enumerate()
            .map(|(k, n)| act(n, &format!("{locus}.lhs[{k}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let rhs = c
            .rhs
            .iter()
            .enumerate()
            .map(|(k, n)| act(n, &format!("{locus}.rhs[{k}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let window = if c.window == 0 { Window::UNBOUNDED } else { Window::steps(c.window) };
        let constraint = Constraint { kind, lhs, rhs, window };
        constraint.check_shape().map_err(|m| ModelError::parse(locus.clone(), m))?;
        constraints.push(constraint);
    }

    let mapping = TypeLevelMapping::new(activities, event_types, triples).map_err(|(e, a, s)| {
        ModelError::parse("mapping", format!("duplicate triple ({}, {}, {})", raw.event_types[e.index()], raw.activities[a.index()], s))
    })?;
    let model = DeclarativeModel::new(start, max_inst, constraints).map_err(|m| ModelError::parse("model", m))?;
    Ok(Knowledge { mapping, model })
}

/// Canonical JSON rendering of a model.
pub fn serialize_model(k: &Knowledge) -> String {
    let m = &k.mapping;
    let an = |a: &ActivityId| m.activity_name(*a).to_string();

    let mut grouped: BTreeMap<(String, String), Vec<StepType>> = BTreeMap::new();
    for &(e, a, s) in m.triples() {
        grouped.entry((m.event_type_name(e).to_string(), an(&a))).or_default().push(s);
    }
    let mapping = grouped
        .into_iter()
        .map(|((event, activity), mut steps)| {
            steps.sort();
            MappingDoc { event, activity, steps: steps.iter().map(|s| s.name().to_string()).collect() }
        })
        .collect();

    let mut start: Vec<String> = k.model.start_acts().iter().map(an).collect();
    start.sort();
    let max_instances = m
        .activities()
        .names()
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), k.model.max_inst(ActivityId(i as u16)).unwrap_or(0)))
        .collect();
    let mut constraints: Vec<ConstraintDoc> = k
        .model
        .constraints()
        .iter()
        .map(|c| {
            let mut lhs: Vec<String> = c.lhs.iter().map(an).collect();
            let mut rhs: Vec<String> = c.rhs.iter().map(an).collect();
            lhs.sort();
            rhs.sort();
            ConstraintDoc { kind: c.kind.name().to_string(), lhs, rhs, window: c.window.0.unwrap_or(0) }
        })
        .collect();
    constraints.sort_by(|a, b| (&a.kind, &a.lhs, &a.rhs, a.window).cmp(&(&b.kind, &b.lhs, &b.rhs, b.window)));

    let doc = ModelDoc {
        v: Some(MODEL_FORMAT_VERSION),
        activities: m.activities().names().to_vec(),
        event_types: m.event_types().names().to_vec(),
        mapping,
        start_activities: start,
        max_instances,
        constraints,
    };
    // Round-trip through `Value` so object keys come out sorted.
    let value = serde_json::to_value(&doc).expect("model document serializes");
    let mut out = serde_json::to_string_pretty(&value).expect("value serializes");
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn care_document_round_trip() {
        let k = parse_model(fixtures::CARE_RESTRICTED_JSON).unwrap();
        let ci = k.mapping.event_type("CannulaInsertion").unwrap();
        assert_eq!(k.mapping.cand_act(ci).unwrap(), vec![k.mapping.activity("A2").unwrap()]);
        let canon = serialize_model(&k);
        let again = parse_model(&canon).unwrap();
        assert_eq!(again, k);
        assert_eq!(serialize_model(&again), canon);
    }

    #[test]
    fn zero_window_rejected() {
        let doc = fixtures::CARE_RESTRICTED_JSON.replace("\"window\": 1", "\"window\": 0");
        // window 0 means unbounded on the wire; shape check only fires for an explicit zero bound.
        assert!(parse_model(&doc).is_ok());
        let bad = Constraint::precedence(&[ActivityId(0)], ActivityId(1), Window(Some(0)));
        assert_eq!(bad.check_shape().unwrap_err(), "window must be ≥ 1");
    }

    #[test]
    fn errors_carry_locus() {
        let doc = fixtures::CARE_RESTRICTED_JSON.replace("\"lhs\": [\"A1\"]", "\"lhs\": [\"A9\"]");
        match parse_model(&doc) {
            Err(ModelError::Parse { locus, message }) => {
                assert_eq!(locus, "constraints[0].lhs[0]");
                assert!(message.contains("A9"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let doc = fixtures::CARE_RESTRICTED_JSON.replace("\"start_activities\": [\"A1\"]", "\"start_activities\": []");
        assert!(matches!(parse_model(&doc), Err(ModelError::Parse { locus, .. }) if locus == "start_activities"));
        match parse_model("{\"activities\": [") {
            Err(ModelError::Parse { locus, .. }) => assert!(locus.starts_with("line 1")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_triple_is_parse_error() {
        let doc = r#"{"activities":["a"],"event_types":["x"],
            "mapping":[{"event":"x","activity":"a","steps":["first"]},{"event":"x","activity":"a","steps":["first"]}],
            "start_activities":["a"],"max_instances":{"a":1},"constraints":[]}"#;
        assert!(matches!(parse_model(doc), Err(ModelError::Parse { locus, .. }) if locus == "mapping"));
    }
}
