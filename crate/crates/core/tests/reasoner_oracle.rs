mod common;

use std::sync::Arc;

use common::naive_aaf::XorShift;
use common::oracle_check::{check, session_for, Outcome};
use common::random_model::{friendly_trace, random_knowledge};
use procsift::model::Event;
use procsift::reasoner::{Query, Session};

#[test]
fn accepted_readings_match_valid_interpretations() {
    let mut rng = XorShift(0x5eed_1234_abcd_0001);
    let (mut compared, mut with_valid, mut finalized) = (0, 0, 0);
    for case in 0..260 {
        let k = Arc::new(random_knowledge(&mut rng, 4));
        let len = 1 + rng.below(8) as usize;
        let fin = rng.below(2) == 0;
        let t = friendly_trace(&mut rng, &k, len, fin);
        match check(&k, &t, len <= 6) {
            Ok(Outcome::Agree { valid }) => {
                compared += 1;
                with_valid += usize::from(valid > 0);
                finalized += usize::from(fin);
            }
            Ok(Outcome::Skipped) => {}
            Err(e) => panic!("case {case}: {e}\nmodel: {}\ntrace: {:?}", procsift::model::serialize_model(&k), t),
        }
    }
    assert!(compared >= 200, "only {compared} cases compared");
    assert!(with_valid >= 50, "too few cases with valid interpretations: {with_valid}");
    assert!(finalized >= 50 && compared - finalized >= 50);
}

#[test]
fn incremental_equals_batch_with_restricted_candidates() {
    let mut rng = XorShift(77);
    for _ in 0..60 {
        let k = Arc::new(random_knowledge(&mut rng, 4));
        let len = 1 + rng.below(7) as usize;
        let t = friendly_trace(&mut rng, &k, len, false);
        // Random candidate subsets, supplied one event at a time with queries in between.
        let cands: Vec<Vec<_>> = t
            .events
            .iter()
            .map(|e| k.mapping.cand_act(e.etype).unwrap().into_iter().filter(|_| rng.below(4) != 0).collect())
            .collect();
        let mut inc = Session::new(Arc::clone(&k));
        for (e, c) in t.events.iter().zip(&cands) {
            inc.update_aaf(e, c).unwrap();
            let _ = inc.accepted(e.index).unwrap();
        }
        let mut batch = Session::new(Arc::clone(&k));
        for (e, c) in t.events.iter().zip(&cands) {
            batch.update_aaf(e, c).unwrap();
        }
        assert_eq!(inc.framework().dump(), batch.framework().dump());
        for idx in 1..=len {
            assert_eq!(inc.accepted(idx).unwrap(), batch.accepted(idx).unwrap());
        }
    }
}

#[test]
fn snapshot_restore_preserves_every_verdict() {
    let mut rng = XorShift(99);
    for _ in 0..60 {
        let k = Arc::new(random_knowledge(&mut rng, 4));
        let len = 2 + rng.below(6) as usize;
        let t = friendly_trace(&mut rng, &k, len, false);
        let mut s = session_for(&k, &t);
        let before: Vec<_> = (1..=len).map(|i| s.accepted(i).unwrap()).collect();
        let snap = s.get_aaf();
        let et = t.events[0].etype;
        s.update_aaf(&Event::new(len + 1, et), &k.mapping.cand_act(et).unwrap()).unwrap();
        let _ = s.accepted(len + 1).unwrap();
        s.set_aaf(&snap).unwrap();
        let after: Vec<_> = (1..=len).map(|i| s.accepted(i).unwrap()).collect();
        assert_eq!(before, after);
        for idx in 1..=len {
            for x in &before[idx - 1] {
                let q = Query::exact(idx, x.activity, x.step, x.instance).skeptical();
                let sk = s.answer(&q).unwrap();
                assert_eq!(sk, procsift::reasoner::Answer::Verdict(before[idx - 1].len() == 1));
            }
        }
    }
}

#[test]
fn readings_never_exceed_instance_bound() {
    let mut rng = XorShift(5);
    for _ in 0..40 {
        let k = Arc::new(random_knowledge(&mut rng, 4));
        let t = friendly_trace(&mut rng, &k, 8, false);
        let s = session_for(&k, &t);
        for idx in 1..=8 {
            for x in s.readings(idx) {
                assert!(x.instance >= 1 && x.instance <= k.model.instance_cap(x.activity, idx));
            }
        }
    }
}
