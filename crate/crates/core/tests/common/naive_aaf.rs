//! Power-set reference semantics for small frameworks.

use procsift::aaf::{ArgId, Framework};

pub struct NaiveSemantics {
    pub preferred: Vec<Vec<ArgId>>,
}

impl NaiveSemantics {
    /// Enumerates all 2^n subsets; only for n ≤ ~16.
    pub fn compute<T>(f: &Framework<T>) -> Self {
        let n = f.len();
        assert!(n <= 20, "naive semantics is exponential");
        let attacks: Vec<u32> = (0..n)
            .map(|a| f.targets_of(ArgId(a as u32)).iter().fold(0u32, |m, b| m | (1 << b.0)))
            .collect();
        let attacked_by = |set: u32| -> u32 {
            (0..n).filter(|&a| set & (1 << a) != 0).fold(0u32, |m, a| m | attacks[a])
        };
        let mut admissible = Vec::new();
        for set in 0u32..(1u32 << n) {
            let hit = attacked_by(set);
            if hit & set != 0 {
                continue;
            }
            // every attacker of a member is attacked by the set
            let ok = (0..n).all(|b| {
                let attacks_member = attacks[b] & set != 0;
                !attacks_member || hit & (1 << b) != 0
            });
            if ok {
                admissible.push(set);
            }
        }
        let mut preferred: Vec<Vec<ArgId>> = admissible
            .iter()
            .filter(|&&s| !admissible.iter().any(|&t| t != s && t & s == s))
            .map(|&s| (0..n as u32).filter(|&a| s & (1 << a) != 0).map(ArgId).collect())
            .collect();
        preferred.sort();
        NaiveSemantics { preferred }
    }

    pub fn credulous(&self, a: ArgId) -> bool {
        self.preferred.iter().any(|p| p.contains(&a))
    }

    pub fn skeptical(&self, a: ArgId) -> bool {
        self.preferred.iter().all(|p| p.contains(&a))
    }
}

/// Deterministic xorshift generator so the test family is reproducible without extra deps.
pub struct XorShift(pub u64);

impl XorShift {
    pub fn next(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }
}

/// Random framework with `n` arguments and each ordered pair (self-attacks included)
/// attacking with probability `p_percent`%.
pub fn random_framework(rng: &mut XorShift, n: usize, p_percent: u64) -> Framework<()> {
    let mut f = Framework::new();
    for _ in 0..n {
        f.add_arg(());
    }
    for a in 0..n {
        for b in 0..n {
            let p = if a == b { p_percent / 3 } else { p_percent };
            if rng.below(100) < p {
                f.add_attack(ArgId(a as u32), ArgId(b as u32));
            }
        }
    }
    f
}

/// Frameworks over `n` arguments whose attack relation is the bit pattern `code`
/// over all n² ordered pairs.
pub fn framework_from_code(n: usize, code: u64) -> Framework<()> {
    let mut f = Framework::new();
    for _ in 0..n {
        f.add_arg(());
    }
    for k in 0..n * n {
        if code & (1 << k) != 0 {
            f.add_attack(ArgId((k / n) as u32), ArgId((k % n) as u32));
        }
    }
    f
}
