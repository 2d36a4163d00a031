// Worker count and sharding never change the samples.

use arsample::sampler::{sample_batch, sample_shard, DecodeOptions, Strategy};
use arsample::toy::stationary;
use arsample::{Error, Result};

pub fn run_example() -> Result<()> {
    let model = stationary(&["A", "B", "C", "D", "</s>"], vec![0.3, 0.25, 0.2, 0.15, 0.1])?;
    let opts = DecodeOptions::new(6);
    for strategy in [Strategy::Arithmetic, Strategy::Ancestral] {
        let serial = sample_batch(&model, &opts, strategy, 64, 11, 1)?;
        for workers in [2, 4, 8] {
            if sample_batch(&model, &opts, strategy, 64, 11, workers)? != serial {
                return Err(Error::Invariant {
                    name: "parallel-determinism".into(),
                    detail: format!("{strategy} with {workers} workers"),
                });
            }
        }
        // Three independent processes could each run one of these shards.
        let mut merged: Vec<_> = (0..3)
            .map(|k| sample_shard(&model, &opts, strategy, 64, 11, k, 3))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        merged.sort_by_key(|(i, _)| *i);
        let merged: Vec<_> = merged.into_iter().map(|(_, s)| s).collect();
        println!("{strategy}: 1/2/4/8 workers and 3 shards agree: {}", merged == serial);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
