//! Admissible-set search by reduction to SAT.
//!
//! A set S is admissible iff it is conflict-free and attacks every attacker
//! of its members. With one variable per argument and an auxiliary variable
//! `d_b` ("S attacks b") per attacking argument, that is
//!
//! * `¬a ∨ ¬b` for every attack between distinct `a`, `b`;
//! * `¬d_b ∨ c₁ ∨ … ∨ c_m` where `c₁…c_m` attack `b`;
//! * `¬a ∨ d_b` for every attack `b → a`;
//! * `¬a` for self-attacking arguments and arguments attacked by the grounded
//!   extension (a sound simplification).
//!
//! The clause-learning solver proves non-membership far faster than plain
//! backtracking on frameworks whose admissible sets span long chains of
//! mutually dependent arguments.

use super::sat::{Lit, Outcome, Solver};
use super::{AafError, ArgId, Framework};

pub const DEFAULT_NODE_BUDGET: u64 = 10_000_000;

/// Cap on solver work (decisions plus conflicts) for one query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub nodes: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { nodes: DEFAULT_NODE_BUDGET }
    }
}

/// An encoded framework answering repeated admissible-set queries; clauses
/// learnt while answering one query speed up the next.
#[derive(Debug, Clone)]
pub struct AdmissibleOracle {
    solver: Solver,
    args: usize,
    budget: Budget,
}

impl AdmissibleOracle {
    pub fn new<T>(f: &Framework<T>) -> Self {
        let n = f.len();
        let dead: Vec<bool> = (0..n).map(|a| f.self_attacking[a] || f.grounded_out()[a]).collect();
        // Auxiliary variables for arguments that attack a live argument.
        let mut aux = vec![usize::MAX; n];
        let mut vars = n;
        for b in 0..n {
            if f.targets[b].iter().any(|a| !dead[a.index()]) {
                aux[b] = vars;
                vars += 1;
            }
        }
        let mut s = Solver::new(vars);
        // Earlier arguments are decided first; auxiliary variables last.
        for a in 0..n {
            s.set_priority(a, 1e-6 * (n - a) as f64 / n as f64);
        }
        for a in 0..n {
            if dead[a] {
                s.add_clause(&[Lit::neg(a)]);
                continue;
            }
            for &b in &f.targets[a] {
                let b = b.index();
                if b != a && !dead[b] && !(b < a && f.targets[b].iter().any(|x| x.index() == a)) {
                    s.add_clause(&[Lit::neg(a), Lit::neg(b)]);
                }
            }
        }
        for b in 0..n {
            if aux[b] == usize::MAX {
                continue;
            }
            let mut clause = vec![Lit::neg(aux[b])];
            clause.extend(f.attackers[b].iter().filter(|c| !dead[c.index()]).map(|c| Lit::pos(c.index())));
            s.add_clause(&clause);
            for &a in &f.targets[b] {
                if !dead[a.index()] {
                    s.add_clause(&[Lit::neg(a.index()), Lit::pos(aux[b])]);
                }
            }
        }
        AdmissibleOracle { solver: s, args: n, budget: Budget::default() }
    }

    pub fn budget(mut self, budget: Budget) -> Self {
        self.budget = budget;
        self
    }

    pub fn set_budget(&mut self, budget: Budget) {
        self.budget = budget;
    }

    fn check(&self, a: ArgId) -> Result<(), AafError> {
        if a.index() < self.args {
            Ok(())
        } else {
            Err(AafError::ForeignArgument(a))
        }
    }

    /// Permanently requires at least one of `args` in every answer.
    pub fn add_any_of(&mut self, args: &[ArgId]) -> Result<(), AafError> {
        for &a in args {
            self.check(a)?;
        }
        self.solver.add_clause(&args.iter().map(|a| Lit::pos(a.index())).collect::<Vec<_>>());
        Ok(())
    }

    /// Some admissible set (sorted) containing `required` and avoiding
    /// `forbidden`, or `None`. Arguments flagged in `prefer` are included
    /// when the search has a free choice.
    pub fn find(
        &mut self,
        required: &[ArgId],
        forbidden: &[ArgId],
        prefer: Option<&[bool]>,
    ) -> Result<Option<Vec<ArgId>>, AafError> {
        let mut assume = Vec::with_capacity(required.len() + forbidden.len());
        for &a in required {
            self.check(a)?;
            assume.push(Lit::pos(a.index()));
        }
        for &a in forbidden {
            self.check(a)?;
            assume.push(Lit::neg(a.index()));
        }
        self.solve(&assume, prefer)
    }

    /// Some admissible set (sorted) containing at least one of `any`, or `None`.
    /// Unlike [`AdmissibleOracle::add_any_of`] the requirement holds for this query only.
    pub fn find_any(&mut self, any: &[ArgId], prefer: Option<&[bool]>) -> Result<Option<Vec<ArgId>>, AafError> {
        for &a in any {
            self.check(a)?;
        }
        // A fresh selector guards the disjunction, so the clause stays
        // harmless (and learnt clauses stay valid) once the selector is retired.
        let sel = self.solver.new_var();
        let mut clause = vec![Lit::neg(sel)];
        clause.extend(any.iter().map(|a| Lit::pos(a.index())));
        self.solver.add_clause(&clause);
        let out = self.solve(&[Lit::pos(sel)], prefer);
        self.solver.add_clause(&[Lit::neg(sel)]);
        out
    }

    fn solve(&mut self, assume: &[Lit], prefer: Option<&[bool]>) -> Result<Option<Vec<ArgId>>, AafError> {
        for a in 0..self.args {
            self.solver.set_phase(a, prefer.is_some_and(|m| m.get(a).copied().unwrap_or(false)));
        }
        match self.solver.solve(assume, self.budget.nodes) {
            Outcome::Sat => Ok(Some((0..self.args).filter(|&a| self.solver.model_value(a)).map(|a| ArgId(a as u32)).collect())),
            Outcome::Unsat => Ok(None),
            Outcome::Exhausted => Err(AafError::Overflow { budget: self.budget.nodes }),
        }
    }
}

/// One admissible-set query against a framework.
pub struct AdmissibleSearch<'f, T> {
    f: &'f Framework<T>,
    required: Vec<ArgId>,
    any_of: Vec<Vec<ArgId>>,
    forbidden: Vec<ArgId>,
    preferred: Option<&'f [bool]>,
    budget: Budget,
}

impl<'f, T> AdmissibleSearch<'f, T> {
    pub fn new(f: &'f Framework<T>) -> Self {
        AdmissibleSearch { f, required: Vec::new(), any_of: Vec::new(), forbidden: Vec::new(), preferred: None, budget: Budget::default() }
    }

    /// The result must contain every argument in `args`.
    pub fn require(mut self, args: impl IntoIterator<Item = ArgId>) -> Self {
        self.required.extend(args);
        self
    }

    /// The result must contain at least one of `args`.
    pub fn require_any(mut self, args: Vec<ArgId>) -> Self {
        self.any_of.push(args);
        self
    }

    pub fn forbid(mut self, args: impl IntoIterator<Item = ArgId>) -> Self {
        self.forbidden.extend(args);
        self
    }

    /// Arguments flagged in `mask` are included when there is a free choice. Only affects which set is found.
    pub fn prefer(mut self, mask: &'f [bool]) -> Self {
        self.preferred = Some(mask);
        self
    }

    pub fn budget(mut self, budget: Budget) -> Self {
        self.budget = budget;
        self
    }

    /// Some admissible set meeting the requirements (sorted), or `None` if there is none.
    pub fn run(self) -> Result<Option<Vec<ArgId>>, AafError> {
        for &a in self.required.iter().chain(&self.forbidden).chain(self.any_of.iter().flatten()) {
            self.f.check(a)?;
        }
        let mut oracle = AdmissibleOracle::new(self.f).budget(self.budget);
        for group in &self.any_of {
            oracle.add_any_of(group)?;
        }
        oracle.find(&self.required, &self.forbidden, self.preferred)
    }
}
