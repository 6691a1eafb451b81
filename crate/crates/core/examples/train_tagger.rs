//! Trains a windowed feed-forward tagger on generated traces, verifies the
//! hand-written gradients against finite differences, and round-trips the
//! trained weights through a file.
//!
//! cargo run --release --example train_tagger -- [window] [epochs]

use procsift::eval::{sequences, train_tagger};
use procsift::synth::{generate_dataset, generate_syn_model, DatasetSpec, SynModelSpec};
use procsift::tagger::{gradient_check, ArchSpec, EmbeddingConfig, Tagger, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let window: usize = args.next().map_or(Ok(3), |s| s.parse())?;
    let epochs: usize = args.next().map_or(Ok(10), |s| s.parse())?;

    for arch in [ArchSpec::Mb { window, hidden: vec![6, 5] }, ArchSpec::Ma { hidden: 4, layers: 2, dense: vec![5], dropout: 0.1 }] {
        let r = gradient_check(&arch, &EmbeddingConfig::default(), 0)?;
        println!("{} gradient check: max relative error {:.2e} over {} parameters", arch.name(), r.max_rel_error, r.params_checked);
    }

    let k = generate_syn_model(&SynModelSpec::default(), 3)?;
    let data = generate_dataset(&k, &DatasetSpec { lengths: vec![(20, 40), (40, 20)], seed: 3, generator: Default::default() })?;
    let (train, test) = data.split(0.2, 3);
    let arch = ArchSpec::mb(window);
    let cfg = TrainConfig { epochs, ..TrainConfig::for_arch(&arch) };
    let tagger = train_tagger(&k, &train, &test, &arch, &EmbeddingConfig::default(), &cfg)?;
    for (epoch, (t, v)) in tagger.meta().train_loss.iter().zip(&tagger.meta().validation_loss).enumerate() {
        println!("epoch {:>3}: loss {t:.4}, validation {v:.4}", epoch + 1);
    }
    let labels = test.activity_labels();
    println!("{} held-out accuracy: {:.1}%", arch.name(), 100.0 * tagger.accuracy(&sequences(&test, &labels))?);

    let path = std::env::temp_dir().join(format!("procsift-{}.json", arch.name()));
    tagger.save(&path)?;
    let back = Tagger::load(&path)?;
    assert_eq!(back.predict_trace(&test.traces[0].trace.events)?, tagger.predict_trace(&test.traces[0].trace.events)?);
    println!("saved and reloaded {}", path.display());
    Ok(())
}
