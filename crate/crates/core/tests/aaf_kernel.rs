mod common;

use common::naive_aaf::{framework_from_code, random_framework, NaiveSemantics, XorShift};
use procsift::aaf::{credulous_accept, is_admissible, preferred_extensions, skeptical_accept, ArgId, Budget, Framework};

fn agree<T>(f: &Framework<T>) -> Result<(), String> {
    let naive = NaiveSemantics::compute(f);
    let budget = Budget::default();
    let pref = preferred_extensions(f, budget).map_err(|e| e.to_string())?;
    if pref != naive.preferred {
        return Err(format!("preferred {pref:?} != {:?}", naive.preferred));
    }
    for a in f.args() {
        if credulous_accept(f, a, budget).unwrap() != naive.credulous(a) {
            return Err(format!("credulous({a}) disagrees"));
        }
        if skeptical_accept(f, a, budget).unwrap() != naive.skeptical(a) {
            return Err(format!("skeptical({a}) disagrees"));
        }
    }
    Ok(())
}

#[test]
fn exhaustive_up_to_three_arguments() {
    for n in 0..=3usize {
        for code in 0..(1u64 << (n * n)) {
            let f = framework_from_code(n, code);
            agree(&f).unwrap_or_else(|e| panic!("n={n} code={code}: {e}"));
        }
    }
}

#[test]
fn random_frameworks_up_to_twelve_arguments() {
    let mut rng = XorShift(0x9e37_79b9_7f4a_7c15);
    for case in 0..200 {
        let n = 1 + rng.below(12) as usize;
        let p = 5 + rng.below(35);
        let f = random_framework(&mut rng, n, p);
        agree(&f).unwrap_or_else(|e| panic!("case {case} (n={n}): {e}\n{}", dump(&f)));
    }
}

fn dump(f: &Framework<()>) -> String {
    f.attack_pairs().map(|(a, b)| format!("{a}->{b}")).collect::<Vec<_>>().join(" ")
}

#[test]
fn preferred_are_admissible_and_incomparable() {
    let mut rng = XorShift(42);
    for _ in 0..100 {
        let n = 2 + rng.below(10) as usize;
        let f = random_framework(&mut rng, n, 20);
        let pref = preferred_extensions(&f, Budget::default()).unwrap();
        assert!(!pref.is_empty());
        for p in &pref {
            assert!(is_admissible(&f, p).unwrap());
            for q in &pref {
                assert!(p == q || !p.iter().all(|a| q.contains(a)), "{p:?} ⊂ {q:?}");
            }
        }
        // determinism
        assert_eq!(pref, preferred_extensions(&f, Budget::default()).unwrap());
    }
}

#[test]
fn self_attackers_never_accepted() {
    let mut rng = XorShift(7);
    for _ in 0..100 {
        let n = 1 + rng.below(8) as usize;
        let f = random_framework(&mut rng, n, 30);
        for a in f.args().filter(|&a| f.is_self_attacking(a)) {
            assert!(!credulous_accept(&f, a, Budget::default()).unwrap());
        }
    }
}

#[test]
fn foreign_argument_is_contract_error() {
    let f = framework_from_code(2, 0b0110);
    assert!(credulous_accept(&f, ArgId(2), Budget::default()).is_err());
    assert!(skeptical_accept(&f, ArgId(7), Budget::default()).is_err());
}
