//! How accuracy degrades with less training data, with and without the
//! reasoner: trains one tagger per fraction of the training split and
//! evaluates each on the same held-out traces.
//!
//! cargo run --release --example training_sweep -- [traces-per-length] [fractions, e.g. 20,60,100]

use std::sync::Arc;

use procsift::eval::{sweep_training_fraction, Bucket, EvalOptions, ReportFormat, SweepSpec};
use procsift::synth::{generate_dataset, generate_syn_model, DatasetSpec, SynModelSpec};
use procsift::tagger::{ArchSpec, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let per_length: usize = args.next().map_or(Ok(30), |s| s.parse())?;
    let fractions: Vec<u32> = args.next().unwrap_or_else(|| "20,60,100".into()).split(',').map(str::parse).collect::<Result<_, _>>()?;

    let k = Arc::new(generate_syn_model(&SynModelSpec::default(), 5)?);
    let spec = DatasetSpec { lengths: vec![(20, per_length), (40, per_length)], seed: 5, generator: Default::default() };
    let (train, test) = generate_dataset(&k, &spec)?.split(0.2, 5);
    let arch = ArchSpec::mb(3);
    let sweep = SweepSpec { fractions, train: TrainConfig { epochs: 15, ..TrainConfig::for_arch(&arch) }, ..SweepSpec::new(arch) };

    let table = sweep_training_fraction(&train, &test, &k, &sweep, &EvalOptions::default(), |ev| {
        let all = ev.table.rows.iter().find(|r| r.bucket == Bucket::All).expect("ALL row");
        eprintln!("{:>3}%: T {:.1}  T+A {:.1}  T+R {:.1}", all.fraction, all.acc_t, all.acc_ta, all.acc_tr);
    })?;
    print!("{}", table.render(ReportFormat::Csv)?);
    Ok(())
}
