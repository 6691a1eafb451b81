use super::*;
use crate::aaf::Budget;
use crate::fixtures::{care, care_restricted, example_trace};
use crate::model::{EventTypeId, StepType, Trace};

fn a(i: u16) -> ActivityId {
    ActivityId(i)
}

fn close(x: &[f64], y: &[f64]) -> bool {
    x.len() == y.len() && x.iter().zip(y).all(|(p, q)| (p - q).abs() < 1e-12)
}

#[test]
fn smoothing_examples() {
    let cfg = PipelineConfig::default();
    let v = smooth_and_filter(&[0.7, 0.3, 0.0], &[a(0), a(1)], &cfg);
    assert!(close(&v, &[0.701 / 1.003, 0.301 / 1.003, 0.0]));
    assert!((v[0] - 0.69890).abs() < 5e-6 && (v[1] - 0.30010).abs() < 5e-6);
    assert_eq!(smooth_and_filter(&[0.7, 0.3, 0.0], &[], &cfg), vec![0.0; 3]);
    // Zero predicted mass on a valid activity is rescued by gamma.
    let v = smooth_and_filter(&[1.0, 0.0, 0.0], &[a(1), a(2)], &cfg);
    assert!(close(&v, &[0.0, 0.001 / 1.003, 0.001 / 1.003]));
    let valid_only = PipelineConfig { denominator: SmoothingDenominator::Valid, pseudo_count: 2.0, ..cfg };
    let v = smooth_and_filter(&[0.5, 0.5, 0.0], &[a(0)], &valid_only);
    assert!(close(&v, &[(1.0 + 0.001) / (2.0 + 0.001), 0.0, 0.0]));
}

#[test]
fn top_k_examples() {
    assert!(close(&top_k(&[0.5, 0.3, 0.2], 2), &[0.625, 0.375, 0.0]));
    assert!(close(&top_k(&[1.0, 3.0, 0.0, 4.0], 4), &[0.125, 0.375, 0.0, 0.5]));
    assert_eq!(top_k(&[0.0; 4], 2), vec![0.0; 4]);
    // Ties go to the lower activity id.
    assert!(close(&top_k(&[0.2, 0.4, 0.4, 0.4], 2), &[0.0, 0.5, 0.5, 0.0]));
    assert!(close(&top_k(&[0.2, 0.4, 0.4, 0.4], 1), &[0.0, 1.0, 0.0, 0.0]));
}

#[test]
fn config_is_checked() {
    let k = Arc::new(care());
    let bad = |cfg: PipelineConfig| Analysis::new(k.clone(), Uniform(3), cfg).is_err();
    assert!(bad(PipelineConfig::default().with_k(0)));
    assert!(bad(PipelineConfig::default().with_k(4)));
    assert!(bad(PipelineConfig { gamma: 0.0, ..Default::default() }));
    assert!(bad(PipelineConfig { pseudo_count: -1.0, ..Default::default() }));
    assert_eq!(
        Analysis::new(k.clone(), Uniform(4), PipelineConfig::default()).unwrap_err(),
        PipelineError::WidthMismatch { tagger: 4, model: 3 }
    );
    let an = Analysis::new(k, Uniform(3), PipelineConfig::default()).unwrap();
    assert_eq!(an.k(), 3);
}

fn run<P: Predictor>(k: &Arc<Knowledge>, p: P, cfg: PipelineConfig, t: &Trace) -> Vec<StepResult> {
    let mut an = Analysis::new(k.clone(), p, cfg).unwrap();
    t.events.iter().map(|e| an.process_event(e).unwrap()).collect()
}

#[test]
fn cannula_insertion_is_always_pre_surgery() {
    let k = Arc::new(care_restricted());
    let t = example_trace(&k, false);
    let taggers = [
        Scripted::one_hot(3, &[a(0), a(0), a(0), a(0)]),
        Scripted::one_hot(3, &[a(2), a(2), a(2), a(2)]),
        Scripted::one_hot(3, &[a(1), a(2), a(0), a(0)]),
        Scripted { activities: 3, by_index: vec![vec![1.0 / 3.0; 3]; 4] },
    ];
    for p in taggers {
        // A narrow beam may strand the prefix (empty support), but never admits another activity.
        for kk in 1..=3 {
            let r = run(&k, p.clone(), PipelineConfig::default().with_k(kk), &t);
            assert!(r[3].support().iter().all(|&x| x == a(1)), "k = {kk}, tagger {:?}", p.by_index);
        }
        let r = run(&k, p.clone(), PipelineConfig::default(), &t);
        assert_eq!(r[3].support(), vec![a(1)], "tagger {:?}", p.by_index);
        assert_eq!(r[3].ranked[0].probability, 1.0);
        assert!(!r[3].deviation);
    }
}

#[test]
fn deviating_event_has_empty_support() {
    // The restricted model must start with A1, and a cannula insertion only maps to A2.
    let k = Arc::new(care_restricted());
    let cannula = k.mapping.event_type("CannulaInsertion").unwrap();
    let t = Trace::from_types("dev", &[cannula], false);
    let r = run(&k, Uniform(3), PipelineConfig::default(), &t);
    assert!(r[0].deviation && r[0].ranked.is_empty() && r[0].valid.is_empty());
    assert_eq!(r[0].top(), None);
}

#[test]
fn beam_of_one_is_certain() {
    let k = Arc::new(care());
    let t = example_trace(&k, false);
    for r in run(&k, Uniform(3), PipelineConfig::default().with_k(1), &t) {
        assert_eq!(r.ranked.len(), 1);
        assert_eq!(r.ranked[0].probability, 1.0);
    }
}

#[test]
fn uniform_tagger_with_full_beam_only_filters() {
    let k = Arc::new(care_restricted());
    let t = example_trace(&k, false);
    let mut an = Analysis::new(k.clone(), Uniform(3), PipelineConfig::default().with_k(3)).unwrap();
    for e in &t.events {
        let r = an.process_event(e).unwrap();
        assert_eq!(r.support(), r.valid);
        let p = r.ranked.iter().map(|x| x.probability).sum::<f64>();
        assert!((p - 1.0).abs() < 1e-12);
    }
    assert_eq!(an.results().len(), 4);
    assert_eq!(an.session().len(), 4);
}

#[test]
fn ranking_is_descending_with_id_ties() {
    let k = Arc::new(care());
    let t = example_trace(&care(), false);
    let p = Scripted { activities: 3, by_index: vec![vec![0.2, 0.4, 0.4]; 4] };
    let mut an = Analysis::new(k, p, PipelineConfig::default()).unwrap();
    an.process_event(&t.events[0]).unwrap();
    let r = an.process_event(&t.events[1]).unwrap();
    let order: Vec<_> = r.ranked.iter().map(|x| x.activity).collect();
    assert_eq!(order, vec![a(1), a(2), a(0)]);
    assert!(close(&r.distribution(3), &top_k(&smooth_and_filter(&[0.2, 0.4, 0.4], &r.valid, an.config()), 3)));
}

#[test]
fn failed_step_leaves_the_analysis_unchanged() {
    let k = Arc::new(care());
    let t = example_trace(&k, false);
    let mut an = Analysis::new(k.clone(), Uniform(3), PipelineConfig::default()).unwrap();
    an.process_event(&t.events[0]).unwrap();
    let before = an.session().get_aaf();
    assert!(matches!(an.process_event(&t.events[2]), Err(PipelineError::Reasoner(ReasonerError::IndexGap { .. }))));
    assert!(an.session().get_aaf() == before);
    assert_eq!(an.results().len(), 1);
    let stranger = Event::new(2, EventTypeId(9));
    assert!(an.process_event(&stranger).is_err());
    assert_eq!(an.session().len(), 1);
    an.process_event(&t.events[1]).unwrap();
}

#[test]
fn finalization_summaries() {
    let k = Arc::new(care());
    let mut an = Analysis::new(k.clone(), Uniform(3), PipelineConfig::default()).unwrap();
    assert_eq!(an.finalize().unwrap(), Summary { events: vec![], inconsistent: vec![] });

    let bs = k.mapping.event_type("BloodSample").unwrap();
    let mut an = Analysis::new(k.clone(), Uniform(3), PipelineConfig::default()).unwrap();
    an.process_event(&Event::new(1, bs)).unwrap();
    let s = an.finalize().unwrap();
    assert_eq!(s.events[0].accepted, vec![InterpArg { index: 1, activity: a(0), step: StepType::FirstAndLast, instance: 1 }]);
    assert!(s.inconsistent.is_empty());
    assert!(an.process_event(&Event::new(2, bs)).is_err());

    // Every retained choice of a closable trace stays consistent.
    let t = example_trace(&k, false);
    let mut an = Analysis::new(k.clone(), Uniform(3), PipelineConfig::default()).unwrap();
    for e in &t.events {
        an.process_event(e).unwrap();
    }
    let s = an.finalize().unwrap();
    assert!(s.inconsistent.is_empty());
    assert!(s.events.iter().all(|e| !e.accepted.is_empty() && !e.unresolved));
}

#[test]
fn finalized_readings_stay_within_the_beams() {
    let k = Arc::new(care_restricted());
    let t = example_trace(&k, false);
    let mut an = Analysis::new(k.clone(), Uniform(3), PipelineConfig::default().with_k(1)).unwrap();
    for e in &t.events {
        an.process_event(e).unwrap();
    }
    let s = an.finalize().unwrap();
    for e in &s.events {
        for x in &e.accepted {
            assert!(an.results()[e.index - 1].support().contains(&x.activity));
        }
    }
}

#[test]
fn overflow_marks_the_step_unresolved() {
    let k = Arc::new(care());
    let t = example_trace(&k, false);
    let session = Session::new(k.clone()).with_budget(Budget { nodes: 0 });
    let mut an = Analysis::with_session(session, Uniform(3), PipelineConfig::default()).unwrap();
    let mut unresolved = 0;
    for e in &t.events {
        let r = an.process_event(e).unwrap();
        if r.unresolved {
            unresolved += 1;
            let mut mapped: Vec<_> = an.session().readings(e.index).map(|x| x.activity).collect();
            mapped.dedup();
            assert!(r.support().iter().all(|x| mapped.contains(x)));
        }
    }
    assert!(unresolved > 0);
}

#[test]
fn batch_predictions_match_incremental_run() {
    let k = Arc::new(care_restricted());
    let t = example_trace(&k, false);
    let p = Scripted { activities: 3, by_index: vec![vec![0.5, 0.3, 0.2], vec![0.1, 0.1, 0.8], vec![0.3, 0.3, 0.4], vec![0.9, 0.05, 0.05]] };
    let inc = run(&k, p.clone(), PipelineConfig::default().with_k(2), &t);
    assert_eq!(analyze_trace(k, &p, &t.events, &PipelineConfig::default().with_k(2)).unwrap(), inc);
}
