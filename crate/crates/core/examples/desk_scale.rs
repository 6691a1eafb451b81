//! End-to-end evaluation on a generated SYN-style model: generate, split,
//! train an MB_5 tagger, and score the three scenarios.
//!
//! cargo run --release --example desk_scale -- [traces-per-length] [seed]

use std::sync::Arc;
use std::time::Instant;

use procsift::eval::{evaluate, train_tagger, EvalOptions};
use procsift::synth::{generate_dataset, generate_syn_model, DatasetSpec, SynModelSpec};
use procsift::tagger::{ArchSpec, EmbeddingConfig, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let per_length: usize = args.next().map_or(Ok(500), |s| s.parse())?;
    let seed: u64 = args.next().map_or(Ok(7), |s| s.parse())?;

    let clock = Instant::now();
    let knowledge = Arc::new(generate_syn_model(&SynModelSpec::default(), seed)?);
    let spec = DatasetSpec { lengths: vec![(20, per_length), (40, per_length), (60, per_length)], seed, generator: Default::default() };
    let data = generate_dataset(&knowledge, &spec)?;
    let (train, test) = data.split(0.2, seed);
    eprintln!("[{:>6.1}s] {} train / {} test traces", clock.elapsed().as_secs_f64(), train.len(), test.len());

    let arch = ArchSpec::mb(5);
    let cfg = TrainConfig { seed, ..TrainConfig::for_arch(&arch) };
    let tagger = train_tagger(&knowledge, &train, &test, &arch, &EmbeddingConfig::default(), &cfg)?;
    eprintln!(
        "[{:>6.1}s] trained {}: final loss {:.4} (validation {:.4})",
        clock.elapsed().as_secs_f64(),
        arch.name(),
        tagger.meta().train_loss.last().unwrap_or(&f64::NAN),
        tagger.meta().validation_loss.last().unwrap_or(&f64::NAN),
    );

    let ev = evaluate(&test, &tagger, &knowledge, &EvalOptions::default(), &arch.name(), 100)?;
    eprintln!(
        "[{:>6.1}s] evaluated {} events, {} deviations, {} unresolved",
        clock.elapsed().as_secs_f64(),
        ev.total.events,
        ev.total.deviations,
        ev.total.unresolved
    );
    print!("{}", ev.table.to_csv()?);
    Ok(())
}
