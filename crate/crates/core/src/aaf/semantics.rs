use super::{AafError, AdmissibleOracle, AdmissibleSearch, ArgId, Budget, Framework};

pub fn is_conflict_free<T>(f: &Framework<T>, set: &[ArgId]) -> Result<bool, AafError> {
    let mask = membership(f, set)?;
    Ok(set.iter().all(|&a| f.targets_of(a).iter().all(|b| !mask[b.index()])))
}

/// Conflict-free and defends each member against each of its attackers.
pub fn is_admissible<T>(f: &Framework<T>, set: &[ArgId]) -> Result<bool, AafError> {
    if !is_conflict_free(f, set)? {
        return Ok(false);
    }
    let mask = membership(f, set)?;
    Ok(set.iter().all(|&a| {
        f.attackers_of(a).iter().all(|&b| f.attackers_of(b).iter().any(|c| mask[c.index()]))
    }))
}

fn membership<T>(f: &Framework<T>, set: &[ArgId]) -> Result<Vec<bool>, AafError> {
    let mut mask = vec![false; f.len()];
    for &a in set {
        f.check(a)?;
        mask[a.index()] = true;
    }
    Ok(mask)
}

/// True iff some admissible set contains `a`.
pub fn credulous_accept<T>(f: &Framework<T>, a: ArgId, budget: Budget) -> Result<bool, AafError> {
    f.check(a)?;
    Ok(AdmissibleSearch::new(f).require([a]).budget(budget).run()?.is_some())
}

/// True iff `a` belongs to every preferred extension.
pub fn skeptical_accept<T>(f: &Framework<T>, a: ArgId, budget: Budget) -> Result<bool, AafError> {
    if !credulous_accept(f, a, budget)? {
        return Ok(false);
    }
    // An admissible set in conflict with `a` extends to a preferred extension without it.
    let mut rivals: Vec<ArgId> = f.attackers_of(a).iter().chain(f.targets_of(a)).copied().collect();
    rivals.sort();
    rivals.dedup();
    if !rivals.is_empty() && AdmissibleSearch::new(f).require_any(rivals).budget(budget).run()?.is_some() {
        return Ok(false);
    }
    // Otherwise an extension may still leave `a` undefended; check them all.
    let mut excluded = false;
    for_each_preferred(f, budget, |p| {
        excluded = p.binary_search(&a).is_err();
        !excluded
    })?;
    Ok(!excluded)
}

/// All ⊆-maximal admissible sets, each sorted, in ascending order.
///
/// Never empty: a framework without non-empty admissible sets yields `[[]]`.
pub fn preferred_extensions<T>(f: &Framework<T>, budget: Budget) -> Result<Vec<Vec<ArgId>>, AafError> {
    let mut all = Vec::new();
    for_each_preferred(f, budget, |p| {
        all.push(p.to_vec());
        true
    })?;
    all.sort();
    Ok(all)
}

/// Calls `visit` on preferred extensions until it returns false or none are left.
fn for_each_preferred<T>(
    f: &Framework<T>,
    budget: Budget,
    mut visit: impl FnMut(&[ArgId]) -> bool,
) -> Result<(), AafError> {
    // Seeds come from an oracle that accumulates one "not inside a known
    // extension" clause per extension found; growing uses a second oracle.
    let mut seeds = AdmissibleOracle::new(f).budget(budget);
    let mut grow = AdmissibleOracle::new(f).budget(budget);
    loop {
        let Some(seed) = seeds.find(&[], &[], None)? else {
            return Ok(());
        };
        let ext = maximize(f, &mut grow, seed)?;
        if !visit(&ext) {
            return Ok(());
        }
        let mut mask = vec![false; f.len()];
        for a in &ext {
            mask[a.index()] = true;
        }
        let outside: Vec<ArgId> = f.args().filter(|a| !mask[a.index()]).collect();
        seeds.add_any_of(&outside)?;
    }
}

fn maximize<T>(f: &Framework<T>, grow: &mut AdmissibleOracle, mut set: Vec<ArgId>) -> Result<Vec<ArgId>, AafError> {
    // A single pass suffices: if no admissible superset of S ∪ {x} exists, none
    // exists for any larger S either.
    for x in f.args() {
        if set.binary_search(&x).is_ok() {
            continue;
        }
        let want: Vec<ArgId> = set.iter().copied().chain([x]).collect();
        if let Some(bigger) = grow.find(&want, &[], None)? {
            set = bigger;
        }
    }
    Ok(set)
}
