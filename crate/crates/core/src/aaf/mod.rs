//! Dung-style abstract argumentation: frameworks, admissibility, preferred
//! extensions and credulous/skeptical acceptance.
//!
//! Argument payloads are opaque to this module.

mod sat;
mod search;
mod semantics;

use std::fmt;
use std::sync::OnceLock;

pub use search::{AdmissibleOracle, AdmissibleSearch, Budget, DEFAULT_NODE_BUDGET};
pub use semantics::{credulous_accept, is_admissible, is_conflict_free, preferred_extensions, skeptical_accept};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArgId(pub u32);

impl ArgId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ArgId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AafError {
    #[error("argument {0} does not belong to the framework")]
    ForeignArgument(ArgId),
    #[error("search budget of {budget} node expansions exceeded")]
    Overflow { budget: u64 },
    #[error("malformed framework dump at line {line}: {message}")]
    Dump { line: usize, message: String },
}

/// Arguments with payload tags and a directed attack relation.
#[derive(Debug, Clone)]
pub struct Framework<T> {
    tags: Vec<T>,
    attackers: Vec<Vec<ArgId>>,
    targets: Vec<Vec<ArgId>>,
    self_attacking: Vec<bool>,
    attack_count: usize,
    grounded_out: OnceLock<Vec<bool>>,
}

impl<T> Default for Framework<T> {
    fn default() -> Self {
        Framework {
            tags: Vec::new(),
            attackers: Vec::new(),
            targets: Vec::new(),
            self_attacking: Vec::new(),
            attack_count: 0,
            grounded_out: OnceLock::new(),
        }
    }
}

impl<T> Framework<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_arg(&mut self, tag: T) -> ArgId {
        let id = ArgId(self.tags.len() as u32);
        self.tags.push(tag);
        self.attackers.push(Vec::new());
        self.targets.push(Vec::new());
        self.self_attacking.push(false);
        self.grounded_out = OnceLock::new();
        id
    }

    /// Adds `from -> to`; duplicates are ignored.
    pub fn add_attack(&mut self, from: ArgId, to: ArgId) {
        assert!(self.contains(from) && self.contains(to), "attack endpoints must exist");
        let out = &mut self.targets[from.index()];
        if out.contains(&to) {
            return;
        }
        out.push(to);
        self.attackers[to.index()].push(from);
        if from == to {
            self.self_attacking[from.index()] = true;
        }
        self.attack_count += 1;
        self.grounded_out = OnceLock::new();
    }

    /// Removes `from -> to` if present.
    pub fn remove_attack(&mut self, from: ArgId, to: ArgId) {
        let out = &mut self.targets[from.index()];
        let Some(pos) = out.iter().position(|&b| b == to) else {
            return;
        };
        out.remove(pos);
        self.attackers[to.index()].retain(|&b| b != from);
        if from == to {
            self.self_attacking[from.index()] = false;
        }
        self.attack_count -= 1;
        self.grounded_out = OnceLock::new();
    }

    pub fn add_mutual(&mut self, a: ArgId, b: ArgId) {
        self.add_attack(a, b);
        self.add_attack(b, a);
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn attack_count(&self) -> usize {
        self.attack_count
    }

    pub fn contains(&self, a: ArgId) -> bool {
        a.index() < self.tags.len()
    }

    pub fn check(&self, a: ArgId) -> Result<(), AafError> {
        if self.contains(a) {
            Ok(())
        } else {
            Err(AafError::ForeignArgument(a))
        }
    }

    pub fn tag(&self, a: ArgId) -> &T {
        &self.tags[a.index()]
    }

    pub fn args(&self) -> impl Iterator<Item = ArgId> + '_ {
        (0..self.tags.len() as u32).map(ArgId)
    }

    pub fn attackers_of(&self, a: ArgId) -> &[ArgId] {
        &self.attackers[a.index()]
    }

    pub fn targets_of(&self, a: ArgId) -> &[ArgId] {
        &self.targets[a.index()]
    }

    pub fn attacks(&self, from: ArgId, to: ArgId) -> bool {
        self.targets[from.index()].contains(&to)
    }

    pub fn is_self_attacking(&self, a: ArgId) -> bool {
        self.self_attacking[a.index()]
    }

    /// All attacks, grouped by attacker in argument order.
    pub fn attack_pairs(&self) -> impl Iterator<Item = (ArgId, ArgId)> + '_ {
        self.args().flat_map(move |a| self.targets[a.index()].iter().map(move |&b| (a, b)))
    }

    /// Arguments attacked by the grounded extension; they belong to no admissible set.
    pub fn grounded_out(&self) -> &[bool] {
        self.grounded_out.get_or_init(|| self.compute_grounded_out())
    }

    fn compute_grounded_out(&self) -> Vec<bool> {
        let n = self.len();
        let mut live_attackers: Vec<usize> = self.attackers.iter().map(Vec::len).collect();
        let mut is_in = vec![false; n];
        let mut out = vec![false; n];
        let mut queue: Vec<usize> = (0..n).filter(|&i| live_attackers[i] == 0).collect();
        while let Some(a) = queue.pop() {
            if is_in[a] || out[a] {
                continue;
            }
            is_in[a] = true;
            for &b in &self.targets[a] {
                if out[b.index()] {
                    continue;
                }
                out[b.index()] = true;
                for &c in &self.targets[b.index()] {
                    let c = c.index();
                    live_attackers[c] -= 1;
                    if live_attackers[c] == 0 && !out[c] {
                        queue.push(c);
                    }
                }
            }
        }
        out
    }
}

impl<T: fmt::Display> Framework<T> {
    /// Line-oriented dump: `arg <id> <tag>` then `att <from> <to>`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for a in self.args() {
            s.push_str(&format!("arg {} {}\n", a, self.tags[a.index()]));
        }
        for (a, b) in self.attack_pairs() {
            s.push_str(&format!("att {a} {b}\n"));
        }
        s
    }
}

impl Framework<String> {
    /// Parses the format written by [`Framework::dump`]. Ids must be dense and in order.
    pub fn parse_dump(text: &str) -> Result<Self, AafError> {
        let mut f = Framework::new();
        for (k, line) in text.lines().enumerate() {
            let bad = |m: &str| AafError::Dump { line: k + 1, message: m.to_string() };
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.splitn(3, ' ');
            match parts.next() {
                Some("arg") => {
                    let id: u32 = parts.next().and_then(|p| p.parse().ok()).ok_or_else(|| bad("bad argument id"))?;
                    if id as usize != f.len() {
                        return Err(bad("argument ids must be dense and ascending"));
                    }
                    f.add_arg(parts.next().unwrap_or("").to_string());
                }
                Some("att") => {
                    let from: u32 = parts.next().and_then(|p| p.parse().ok()).ok_or_else(|| bad("bad attacker"))?;
                    let to: u32 = parts.next().and_then(|p| p.trim().parse().ok()).ok_or_else(|| bad("bad target"))?;
                    if from as usize >= f.len() || to as usize >= f.len() {
                        return Err(bad("attack references unknown argument"));
                    }
                    f.add_attack(ArgId(from), ArgId(to));
                }
                _ => return Err(bad("expected `arg` or `att`")),
            }
        }
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trip() {
        let mut f = Framework::new();
        let x = f.add_arg("x".to_string());
        let y = f.add_arg("y".to_string());
        f.add_mutual(x, y);
        f.add_attack(y, y);
        f.add_attack(y, y);
        assert_eq!(f.attack_count(), 3);
        let text = f.dump();
        assert_eq!(text, "arg 0 x\narg 1 y\natt 0 1\natt 1 0\natt 1 1\n");
        let g = Framework::parse_dump(&text).unwrap();
        assert_eq!(g.dump(), text);
        assert!(g.is_self_attacking(y));
    }

    #[test]
    fn grounded_out_marks_defeated() {
        // x -> y -> z: x in, y out, z in.
        let mut f = Framework::new();
        let x = f.add_arg(());
        let y = f.add_arg(());
        let z = f.add_arg(());
        f.add_attack(x, y);
        f.add_attack(y, z);
        assert_eq!(f.grounded_out(), &[false, true, false]);
        let w = f.add_arg(());
        f.add_attack(w, x);
        assert_eq!(f.grounded_out(), &[true, false, true, false]);
        let _ = z;
    }

    #[test]
    fn dump_errors() {
        assert!(matches!(Framework::parse_dump("arg 1 x"), Err(AafError::Dump { line: 1, .. })));
        assert!(matches!(Framework::parse_dump("arg 0 x\natt 0 4"), Err(AafError::Dump { line: 2, .. })));
    }
}
