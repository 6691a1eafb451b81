//! A compact CDCL SAT solver.
//!
//! Two-watched-literal propagation, first-UIP clause learning with local
//! minimization, VSIDS branching with phase saving, Luby restarts and
//! LBD-based reduction of learnt clauses. Queries take assumptions, so one
//! clause database (and everything learnt from it) serves many queries.

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) struct Lit(u32);

impl Lit {
    pub(crate) fn pos(v: usize) -> Lit {
        Lit((v as u32) << 1)
    }

    pub(crate) fn neg(v: usize) -> Lit {
        Lit(((v as u32) << 1) | 1)
    }

    fn var(self) -> usize {
        (self.0 >> 1) as usize
    }

    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }

    fn idx(self) -> usize {
        self.0 as usize
    }
}

const UNDEF: i8 = 0;
const TRUE: i8 = 1;
const FALSE: i8 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Sat,
    Unsat,
    /// The decision-plus-conflict budget ran out.
    Exhausted,
}

#[derive(Debug, Clone, Copy)]
struct Watch {
    cref: u32,
    blocker: Lit,
}

#[derive(Debug, Clone, Copy)]
struct ClauseMeta {
    start: u32,
    len: u32,
    learnt: bool,
    deleted: bool,
    lbd: u32,
}

#[derive(Debug, Clone)]
pub(crate) struct Solver {
    /// False once the clause database itself is unsatisfiable.
    ok: bool,
    arena: Vec<Lit>,
    clauses: Vec<ClauseMeta>,
    learnt_live: usize,
    max_learnts: usize,
    watches: Vec<Vec<Watch>>,
    /// Indexed by literal.
    value: Vec<i8>,
    level: Vec<u32>,
    reason: Vec<Option<u32>>,
    phase: Vec<bool>,
    activity: Vec<f64>,
    var_inc: f64,
    heap: VarHeap,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    seen: Vec<bool>,
    model: Vec<bool>,
}

const VAR_DECAY: f64 = 0.95;
const RESTART_UNIT: u64 = 100;

impl Solver {
    pub(crate) fn new(vars: usize) -> Self {
        let mut heap = VarHeap::default();
        let activity = vec![0.0; vars];
        for v in 0..vars {
            heap.insert(v, &activity);
        }
        Solver {
            ok: true,
            arena: Vec::new(),
            clauses: Vec::new(),
            learnt_live: 0,
            max_learnts: 4000,
            watches: vec![Vec::new(); 2 * vars],
            value: vec![UNDEF; 2 * vars],
            level: vec![0; vars],
            reason: vec![None; vars],
            phase: vec![false; vars],
            activity,
            var_inc: 1.0,
            heap,
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            seen: vec![false; vars],
            model: Vec::new(),
        }
    }

    /// Adds a fresh variable. Only call between solves.
    pub(crate) fn new_var(&mut self) -> usize {
        let v = self.level.len();
        self.watches.push(Vec::new());
        self.watches.push(Vec::new());
        self.value.push(UNDEF);
        self.value.push(UNDEF);
        self.level.push(0);
        self.reason.push(None);
        self.phase.push(false);
        self.activity.push(0.0);
        self.seen.push(false);
        self.heap.insert(v, &self.activity);
        v
    }

    pub(crate) fn vars(&self) -> usize {
        self.level.len()
    }

    /// Initial branching priority; higher is decided earlier. Only call before solving.
    pub(crate) fn set_priority(&mut self, v: usize, p: f64) {
        self.activity[v] = p;
        self.heap.rebuild(&self.activity);
    }

    pub(crate) fn set_phase(&mut self, v: usize, value: bool) {
        self.phase[v] = value;
    }

    pub(crate) fn model_value(&self, v: usize) -> bool {
        self.model[v]
    }

    fn lit_value(&self, l: Lit) -> i8 {
        self.value[l.idx()]
    }

    fn decision_level(&self) -> usize {
        self.trail_lim.len()
    }

    /// Adds a permanent clause. Must be called at decision level 0.
    pub(crate) fn add_clause(&mut self, lits: &[Lit]) {
        debug_assert_eq!(self.decision_level(), 0);
        if !self.ok {
            return;
        }
        let mut c: Vec<Lit> = lits.to_vec();
        c.sort();
        c.dedup();
        if c.windows(2).any(|w| w[0] == w[1].not()) {
            return;
        }
        c.retain(|&l| self.lit_value(l) != FALSE);
        if c.iter().any(|&l| self.lit_value(l) == TRUE) {
            return;
        }
        match c.len() {
            0 => self.ok = false,
            1 => {
                self.enqueue(c[0], None);
                if self.propagate().is_some() {
                    self.ok = false;
                }
            }
            _ => {
                self.attach(&c, false, 0);
            }
        }
    }

    fn attach(&mut self, lits: &[Lit], learnt: bool, lbd: u32) -> u32 {
        let cref = self.clauses.len() as u32;
        self.clauses.push(ClauseMeta { start: self.arena.len() as u32, len: lits.len() as u32, learnt, deleted: false, lbd });
        self.arena.extend_from_slice(lits);
        self.watches[lits[0].idx()].push(Watch { cref, blocker: lits[1] });
        self.watches[lits[1].idx()].push(Watch { cref, blocker: lits[0] });
        if learnt {
            self.learnt_live += 1;
        }
        cref
    }

    fn lits(&self, cref: u32) -> &[Lit] {
        let m = self.clauses[cref as usize];
        &self.arena[m.start as usize..(m.start + m.len) as usize]
    }

    fn enqueue(&mut self, l: Lit, reason: Option<u32>) {
        self.value[l.idx()] = TRUE;
        self.value[l.not().idx()] = FALSE;
        let v = l.var();
        self.level[v] = self.decision_level() as u32;
        self.reason[v] = reason;
        self.trail.push(l);
    }

    /// Unit propagation; returns a conflicting clause if one arises.
    fn propagate(&mut self) -> Option<u32> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = p.not();
            let mut ws = std::mem::take(&mut self.watches[false_lit.idx()]);
            let (mut i, mut j) = (0, 0);
            let mut conflict = None;
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.lit_value(w.blocker) == TRUE {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let m = self.clauses[w.cref as usize];
                if m.deleted {
                    continue;
                }
                let (start, len) = (m.start as usize, m.len as usize);
                if self.arena[start] == false_lit {
                    self.arena.swap(start, start + 1);
                }
                let first = self.arena[start];
                if first != w.blocker && self.lit_value(first) == TRUE {
                    ws[j] = Watch { cref: w.cref, blocker: first };
                    j += 1;
                    continue;
                }
                let mut moved = false;
                for k in 2..len {
                    let l = self.arena[start + k];
                    if self.lit_value(l) != FALSE {
                        self.arena.swap(start + 1, start + k);
                        self.watches[l.idx()].push(Watch { cref: w.cref, blocker: first });
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = Watch { cref: w.cref, blocker: first };
                j += 1;
                if self.lit_value(first) == FALSE {
                    conflict = Some(w.cref);
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, Some(w.cref));
                }
            }
            ws.truncate(j);
            self.watches[false_lit.idx()] = ws;
            if conflict.is_some() {
                self.qhead = self.trail.len();
                return conflict;
            }
        }
        None
    }

    fn bump(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.heap.increased(v, &self.activity);
    }

    /// First-UIP analysis: the learnt clause (asserting literal first, the
    /// literal of the backjump level second), the backjump level and the LBD.
    fn analyze(&mut self, mut confl: u32) -> (Vec<Lit>, usize, u32) {
        let current = self.decision_level() as u32;
        let mut learnt = vec![Lit(0)];
        let mut pending = 0usize;
        let mut p: Option<Lit> = None;
        let mut idx = self.trail.len();
        loop {
            let skip = usize::from(p.is_some());
            let m = self.clauses[confl as usize];
            for k in skip..m.len as usize {
                let q = self.arena[m.start as usize + k];
                let v = q.var();
                if self.seen[v] || self.level[v] == 0 {
                    continue;
                }
                self.seen[v] = true;
                self.bump(v);
                if self.level[v] >= current {
                    pending += 1;
                } else {
                    learnt.push(q);
                }
            }
            loop {
                idx -= 1;
                if self.seen[self.trail[idx].var()] {
                    break;
                }
            }
            let lit = self.trail[idx];
            p = Some(lit);
            self.seen[lit.var()] = false;
            pending -= 1;
            if pending == 0 {
                break;
            }
            confl = self.reason[lit.var()].expect("implied literals at the conflict level have reasons");
        }
        learnt[0] = p.expect("conflict has a literal at the current level").not();

        // Drop literals implied by the rest of the clause.
        let redundant = |s: &Self, q: Lit| match s.reason[q.var()] {
            None => false,
            Some(r) => s.lits(r)[1..].iter().all(|x| s.seen[x.var()] || s.level[x.var()] == 0),
        };
        let keep: Vec<bool> = learnt.iter().enumerate().map(|(k, &q)| k == 0 || !redundant(self, q)).collect();
        for &q in &learnt[1..] {
            self.seen[q.var()] = false;
        }
        let mut out: Vec<Lit> = learnt.iter().zip(&keep).filter(|(_, &k)| k).map(|(&q, _)| q).collect();

        let mut back = 0usize;
        if out.len() > 1 {
            let mut best = 1;
            for k in 2..out.len() {
                if self.level[out[k].var()] > self.level[out[best].var()] {
                    best = k;
                }
            }
            out.swap(1, best);
            back = self.level[out[1].var()] as usize;
        }
        let mut levels: Vec<u32> = out.iter().map(|l| self.level[l.var()]).collect();
        levels.sort_unstable();
        levels.dedup();
        (out, back, levels.len() as u32)
    }

    fn backtrack(&mut self, level: usize) {
        if self.decision_level() <= level {
            return;
        }
        let stop = self.trail_lim[level];
        for k in (stop..self.trail.len()).rev() {
            let l = self.trail[k];
            let v = l.var();
            self.value[l.idx()] = UNDEF;
            self.value[l.not().idx()] = UNDEF;
            self.reason[v] = None;
            self.phase[v] = l == Lit::pos(v);
            self.heap.insert(v, &self.activity);
        }
        self.trail.truncate(stop);
        self.trail_lim.truncate(level);
        self.qhead = stop;
    }

    fn reduce_learnts(&mut self) {
        let mut cands: Vec<(u32, u32)> = self
            .clauses
            .iter()
            .enumerate()
            .filter(|(_, m)| m.learnt && !m.deleted && m.lbd > 2)
            .map(|(k, m)| (m.lbd, k as u32))
            .collect();
        cands.sort_unstable_by(|a, b| b.cmp(a));
        for &(_, k) in cands.iter().take(cands.len() / 2) {
            self.clauses[k as usize].deleted = true;
            self.learnt_live -= 1;
        }
        self.max_learnts += self.max_learnts / 10;
    }

    /// Searches for a model satisfying all clauses and `assumptions`.
    /// `budget` caps decisions plus conflicts.
    pub(crate) fn solve(&mut self, assumptions: &[Lit], budget: u64) -> Outcome {
        self.backtrack(0);
        if !self.ok {
            return Outcome::Unsat;
        }
        let mut spent = 0u64;
        let mut restarts = 0u32;
        let mut until_restart = luby(restarts) * RESTART_UNIT;
        loop {
            if let Some(confl) = self.propagate() {
                spent += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    return Outcome::Unsat;
                }
                let (learnt, back, lbd) = self.analyze(confl);
                self.backtrack(back);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], None);
                } else {
                    let cref = self.attach(&learnt, true, lbd);
                    self.enqueue(learnt[0], Some(cref));
                }
                self.var_inc /= VAR_DECAY;
                until_restart = until_restart.saturating_sub(1);
                if spent > budget {
                    self.backtrack(0);
                    return Outcome::Exhausted;
                }
                continue;
            }
            if until_restart == 0 {
                restarts += 1;
                until_restart = luby(restarts) * RESTART_UNIT;
                self.backtrack(0);
                if self.learnt_live > self.max_learnts {
                    self.reduce_learnts();
                }
                continue;
            }
            let dl = self.decision_level();
            if dl < assumptions.len() {
                let a = assumptions[dl];
                match self.lit_value(a) {
                    TRUE => self.trail_lim.push(self.trail.len()),
                    FALSE => {
                        self.backtrack(0);
                        return Outcome::Unsat;
                    }
                    _ => {
                        self.trail_lim.push(self.trail.len());
                        self.enqueue(a, None);
                    }
                }
                continue;
            }
            spent += 1;
            if spent > budget {
                self.backtrack(0);
                return Outcome::Exhausted;
            }
            let Some(v) = self.next_branch() else {
                self.model = (0..self.vars()).map(|v| self.value[Lit::pos(v).idx()] == TRUE).collect();
                self.backtrack(0);
                return Outcome::Sat;
            };
            self.trail_lim.push(self.trail.len());
            let l = if self.phase[v] { Lit::pos(v) } else { Lit::neg(v) };
            self.enqueue(l, None);
        }
    }

    fn next_branch(&mut self) -> Option<usize> {
        while let Some(v) = self.heap.pop(&self.activity) {
            if self.value[Lit::pos(v).idx()] == UNDEF {
                return Some(v);
            }
        }
        None
    }
}

/// The Luby sequence 1, 1, 2, 1, 1, 2, 4, …
fn luby(i: u32) -> u64 {
    let mut i = i as u64 + 1;
    loop {
        let k = 64 - i.leading_zeros() as u64;
        if i == (1 << k) - 1 {
            return 1 << (k - 1);
        }
        i -= (1 << (k - 1)) - 1;
    }
}

/// Max-heap of variables keyed by activity; ties go to the lower index.
#[derive(Debug, Clone, Default)]
struct VarHeap {
    heap: Vec<usize>,
    pos: Vec<Option<usize>>,
}

impl VarHeap {
    fn above(act: &[f64], a: usize, b: usize) -> bool {
        act[a] > act[b] || (act[a] == act[b] && a < b)
    }

    fn insert(&mut self, v: usize, act: &[f64]) {
        if self.pos.len() <= v {
            self.pos.resize(v + 1, None);
        }
        if self.pos[v].is_some() {
            return;
        }
        self.pos[v] = Some(self.heap.len());
        self.heap.push(v);
        self.up(self.heap.len() - 1, act);
    }

    fn increased(&mut self, v: usize, act: &[f64]) {
        if let Some(Some(p)) = self.pos.get(v).copied() {
            self.up(p, act);
        }
    }

    fn pop(&mut self, act: &[f64]) -> Option<usize> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().expect("non-empty");
        self.pos[top] = None;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.pos[last] = Some(0);
            self.down(0, act);
        }
        Some(top)
    }

    fn rebuild(&mut self, act: &[f64]) {
        let vars: Vec<usize> = self.heap.drain(..).collect();
        for &v in &vars {
            self.pos[v] = None;
        }
        for v in vars {
            self.insert(v, act);
        }
    }

    fn up(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            let u = self.heap[parent];
            if !Self::above(act, v, u) {
                break;
            }
            self.heap[i] = u;
            self.pos[u] = Some(i);
            i = parent;
        }
        self.heap[i] = v;
        self.pos[v] = Some(i);
    }

    fn down(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        let n = self.heap.len();
        loop {
            let l = 2 * i + 1;
            if l >= n {
                break;
            }
            let r = l + 1;
            let c = if r < n && Self::above(act, self.heap[r], self.heap[l]) { r } else { l };
            let u = self.heap[c];
            if !Self::above(act, u, v) {
                break;
            }
            self.heap[i] = u;
            self.pos[u] = Some(i);
            i = c;
        }
        self.heap[i] = v;
        self.pos[v] = Some(i);
    }
}
