//! Dung semantics on a small framework: admissible sets, preferred
//! extensions, and credulous versus skeptical acceptance.
//!
//! cargo run --example argumentation

use procsift::aaf::{credulous_accept, is_admissible, preferred_extensions, skeptical_accept, Budget, Framework};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // a ⇄ b, both attack c, c attacks d, and e attacks itself.
    let mut f = Framework::new();
    let [a, b, c, d, e] = ["a", "b", "c", "d", "e"].map(|n| f.add_arg(n));
    f.add_mutual(a, b);
    f.add_attack(a, c);
    f.add_attack(b, c);
    f.add_attack(c, d);
    f.add_attack(e, e);

    let budget = Budget::default();
    let name = |set: &[procsift::aaf::ArgId]| set.iter().map(|&x| *f.tag(x)).collect::<Vec<_>>().join(", ");
    println!("{{a, d}} admissible: {}", is_admissible(&f, &[a, d])?);
    println!("{{c}} admissible: {}", is_admissible(&f, &[c])?);
    for ext in preferred_extensions(&f, budget)? {
        println!("preferred: {{{}}}", name(&ext));
    }
    for x in f.args() {
        println!(
            "{}: credulous {:<5} skeptical {}",
            f.tag(x),
            credulous_accept(&f, x, budget)?,
            skeptical_accept(&f, x, budget)?
        );
    }
    Ok(())
}
