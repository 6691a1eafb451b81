use super::*;
use crate::fixtures::{example_trace, CARE_RESTRICTED_JSON};
use crate::model::{parse_model, Assignment, Interpretation, StepType};
use crate::pipeline::{Scripted, Uniform};
use crate::synth::{generate_dataset, generate_syn_model, DatasetSpec, SynModelSpec};

/// The restricted care model plus an activity no event type maps to.
fn care_with_idle_activity() -> Arc<Knowledge> {
    let doc = CARE_RESTRICTED_JSON
        .replace(r#""activities": ["A1", "A2", "A3"]"#, r#""activities": ["A1", "A2", "A3", "A4"]"#)
        .replace(r#""A3": 1}"#, r#""A3": 1, "A4": 1}"#);
    Arc::new(parse_model(&doc).unwrap())
}

/// Example trace labelled with the valid interpretation A1 A1 A2 A2.
fn example(k: &Knowledge) -> LabeledTrace {
    let (a1, a2) = (ActivityId(0), ActivityId(1));
    LabeledTrace {
        trace: example_trace(k, false),
        labels: Interpretation(vec![
            Assignment::new(a1, StepType::First, 1),
            Assignment::new(a1, StepType::Last, 1),
            Assignment::new(a2, StepType::First, 1),
            Assignment::new(a2, StepType::Last, 1),
        ]),
    }
}

#[test]
fn ground_truth_tagger_is_always_right() {
    let k = care_with_idle_activity();
    let t = example(&k);
    let oracle = Scripted::one_hot(4, &t.activities());
    let tally = evaluate_trace(&t, &oracle, &k, &EvalOptions::default()).unwrap();
    assert_eq!((tally.events, tally.correct_t, tally.correct_ta, tally.correct_tr), (4, 4, 4, 4));
    assert_eq!(tally.deviations, 0);
}

#[test]
fn smoothing_rescues_a_tagger_stuck_on_an_unmapped_activity() {
    // All mass on A4. T is always wrong. T+A falls back to the lowest mapped
    // id (A1, A1, A1, A2): right on events 1, 2 and 4. T+R smooths to the
    // lowest valid id, which is A1 for events 1–3 and A2 for event 4.
    let k = care_with_idle_activity();
    let t = example(&k);
    let stuck = Scripted { activities: 4, by_index: vec![vec![0.0, 0.0, 0.0, 1.0]; 4] };
    let tally = evaluate_trace(&t, &stuck, &k, &EvalOptions::default()).unwrap();
    assert_eq!((tally.correct_t, tally.correct_ta, tally.correct_tr), (0, 3, 3));
    let ds = Dataset { traces: vec![t] };
    let ev = evaluate(&ds, &stuck, &k, &EvalOptions::default(), "stuck", 100).unwrap();
    let all = ev.table.find("stuck", Bucket::All, 100).unwrap();
    assert_eq!((all.acc_t, all.acc_ta, all.acc_tr), (0.0, 75.0, 75.0));
    assert_eq!(ev.table.rows.len(), 2);
    assert_eq!(ev.table.rows[0].bucket, Bucket::Length(4));
}

#[test]
fn label_contract_is_checked() {
    let k = care_with_idle_activity();
    let mut t = example(&k);
    t.labels.0.pop();
    assert!(matches!(evaluate_trace(&t, &Uniform(4), &k, &EvalOptions::default()), Err(EvalError::Contract { .. })));
    let mut t = example(&k);
    t.labels.0[0].activity = ActivityId(9);
    assert!(matches!(evaluate_trace(&t, &Uniform(4), &k, &EvalOptions::default()), Err(EvalError::Contract { .. })));
    assert!(matches!(
        evaluate_trace(&example(&k), &Uniform(3), &k, &EvalOptions::default()),
        Err(EvalError::Pipeline(PipelineError::WidthMismatch { .. }))
    ));
}

fn small_syn() -> (Arc<Knowledge>, Dataset) {
    let spec = SynModelSpec { trial_lengths: vec![8, 12], ..SynModelSpec::default() };
    let k = Arc::new(generate_syn_model(&spec, 3).unwrap());
    let ds = generate_dataset(&k, &DatasetSpec { lengths: vec![(8, 12), (12, 8)], seed: 5, generator: Default::default() }).unwrap();
    (k, ds)
}

#[test]
fn filtering_never_loses_the_ground_truth() {
    let (k, ds) = small_syn();
    let n = k.mapping.activities().len();
    let opts = EvalOptions { pipeline: PipelineConfig::default().with_k(n), ..Default::default() };
    let mut rng = 17u64;
    for t in &ds.traces {
        // Full beam: every label must stay reasoner-valid.
        let mut an = Analysis::new(k.clone(), Uniform(n), opts.pipeline.clone()).unwrap();
        for (e, y) in t.trace.events.iter().zip(t.activities()) {
            let r = an.process_event(e).unwrap();
            assert!(r.valid.contains(&y), "{}: event {} label {y:?} not in {:?}", t.trace.id, e.index, r.valid);
        }
        // Mapping restriction never hurts on valid labels.
        let noisy = Scripted {
            activities: n,
            by_index: (0..t.len())
                .map(|_| {
                    (0..n)
                        .map(|_| {
                            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                            (rng >> 33) as f64
                        })
                        .collect()
                })
                .collect(),
        };
        let tally = evaluate_trace(t, &noisy, &k, &EvalOptions::default()).unwrap();
        assert!(tally.correct_ta >= tally.correct_t);
        assert_eq!(tally.deviations, 0);
    }
}

#[test]
fn reasoning_costs_more_than_tagging() {
    let (k, ds) = small_syn();
    let ev = evaluate(&ds, &Uniform(16), &k, &EvalOptions::default(), "uniform", 100).unwrap();
    assert!(ev.total.time_tr_ms >= ev.total.time_t_ms);
    assert_eq!(ev.total.events, ds.event_count());
    assert_eq!(ev.by_length.keys().copied().collect::<Vec<_>>(), vec![8, 12]);
    let par = evaluate(&ds, &Uniform(16), &k, &EvalOptions { parallel: true, ..Default::default() }, "uniform", 100).unwrap();
    assert_eq!(par.total.correct_tr, ev.total.correct_tr);
}

#[test]
fn sweep_has_a_row_per_fraction() {
    let (k, ds) = small_syn();
    let (train, test) = ds.split(0.25, 1);
    assert_eq!((train.len(), test.len()), (15, 5));
    let mut spec = SweepSpec::new(ArchSpec::Mb { window: 2, hidden: vec![8] });
    spec.fractions = vec![20, 100];
    spec.train.epochs = 2;
    let opts = EvalOptions::default();
    let mut seen = 0;
    let table = sweep_training_fraction(&train, &test, &k, &spec, &opts, |_| seen += 1).unwrap();
    assert_eq!(seen, 2);
    assert_eq!(table.rows.len(), 2 * 3);
    let full = train_tagger(&k, &train, &test, &spec.arch, &spec.embedding, &spec.train).unwrap();
    let plain = evaluate(&test, &full, &k, &opts, "MB_2", 100).unwrap();
    for (a, b) in table.rows.iter().filter(|r| r.fraction == 100).zip(&plain.table.rows) {
        assert_eq!((a.bucket, a.acc_t, a.acc_ta, a.acc_tr), (b.bucket, b.acc_t, b.acc_ta, b.acc_tr));
    }
    spec.fractions = vec![0];
    assert!(sweep_training_fraction(&train, &test, &k, &spec, &opts, |_| ()).is_err());
}

fn sample_table() -> MetricsTable {
    let row = |bucket, fraction, acc: f64| MetricsRow {
        arch: "MB_5".into(),
        bucket,
        fraction,
        acc_t: acc,
        acc_ta: acc + 1.5,
        acc_tr: acc + 10.0 / 3.0,
        time_t_ms: 0.012345678901234,
        time_ta_ms: 0.0125,
        time_tr_ms: 123.456,
    };
    MetricsTable {
        rows: vec![
            row(Bucket::Length(20), 20, 50.0),
            row(Bucket::Length(40), 20, 40.0),
            row(Bucket::All, 20, 45.0),
            row(Bucket::Length(20), 100, 70.0),
            row(Bucket::Length(40), 100, 60.0),
            row(Bucket::All, 100, 65.0),
        ],
    }
}

#[test]
fn csv_round_trips() {
    let t = sample_table();
    let text = t.to_csv().unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
    assert!(text.lines().nth(3).unwrap().starts_with("MB_5,ALL,20,45.0,46.5,"));
    assert_eq!(MetricsTable::from_csv(&text).unwrap(), t);
    assert!(MetricsTable::default().to_csv().is_err());
    assert!(MetricsTable::from_csv("a,b\n1,2\n").is_err());
    assert!(MetricsTable::from_csv(&text.replace(",ALL,", ",all,")).is_err());
}

#[test]
fn plot_data_series() {
    let p = sample_table().plot_data().unwrap();
    let get = |n: &str| p.series.iter().find(|s| s.name == n).unwrap_or_else(|| panic!("{n}"));
    assert_eq!(get("accuracy-vs-length/MB_5/100/T").points, vec![(20.0, 70.0), (40.0, 60.0)]);
    assert_eq!(get("time-vs-length/MB_5/20/T+R").points, vec![(20.0, 123.456), (40.0, 123.456)]);
    assert_eq!(get("accuracy-vs-fraction/MB_5/T+A").points, vec![(20.0, 46.5), (100.0, 66.5)]);
    assert_eq!(p.series.len(), 2 * 6 + 3);
    assert!(MetricsTable::default().plot_data().is_err());
    let dir = tempfile::tempdir().unwrap();
    sample_table().write(&dir.path().join("p.json"), ReportFormat::PlotData).unwrap();
}
