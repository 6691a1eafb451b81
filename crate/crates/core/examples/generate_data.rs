//! Samples a SYN-style process model and a labelled trace dataset, writes
//! both to a directory, and reads the dataset back.
//!
//! cargo run --release --example generate_data -- [out-dir] [traces-per-length] [seed]

use std::path::PathBuf;

use procsift::model::serialize_model;
use procsift::synth::{
    constraint_census, generate_dataset, generate_syn_model, read_dataset, write_dataset, DatasetSpec, SynModelSpec,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir: PathBuf = args.next().map_or_else(|| std::env::temp_dir().join("procsift-syn"), PathBuf::from);
    let per_length: usize = args.next().map_or(Ok(20), |s| s.parse())?;
    let seed: u64 = args.next().map_or(Ok(1), |s| s.parse())?;
    std::fs::create_dir_all(&dir)?;

    let k = generate_syn_model(&SynModelSpec::default(), seed)?;
    let degrees: Vec<usize> =
        (0..k.mapping.event_types().len()).map(|e| k.mapping.cand_act(procsift::model::EventTypeId(e as u16)).map_or(0, |c| c.len())).collect();
    println!("activities per event type: {degrees:?}");
    println!("constraints (must, not, precedence, negative precedence): {:?}", constraint_census(&k));
    let model_path = dir.join("model.json");
    std::fs::write(&model_path, serialize_model(&k))?;

    let spec = DatasetSpec { lengths: vec![(20, per_length), (40, per_length), (60, per_length)], seed, generator: Default::default() };
    let data = generate_dataset(&k, &spec)?;
    let data_path = dir.join("traces.jsonl");
    let manifest = write_dataset(&data_path, &k, &data, &spec)?;
    println!("{} traces, {} events -> {}", data.len(), data.event_count(), data_path.display());
    println!("manifest: {}", serde_json::to_string(&manifest)?);

    let back = read_dataset(&data_path, &k)?;
    assert_eq!(back, data);
    let first = &back.traces[0];
    let labels: Vec<&str> = first.activities().iter().take(8).map(|&a| k.mapping.activity_name(a)).collect();
    println!("{} starts with activities {labels:?}", first.trace.id);
    println!("model written to {}", model_path.display());
    Ok(())
}
