// Decode a shifted lattice of codes and compare against ancestral draws.

use std::collections::HashSet;

use arsample::sampler::{arithmetic_decode, make_lattice, sample_batch, DecodeOptions, Strategy};
use arsample::toy::stationary;
use arsample::lm::LanguageModel;
use arsample::Result;

pub fn run_example() -> Result<()> {
    let model = stationary(&["A", "B", "C", "</s>"], vec![0.4, 0.3, 0.2, 0.1])?;
    let opts = DecodeOptions::new(4);
    let vocab = model.vocab();

    let lattice = make_lattice(8, 42)?;
    println!("lattice offset {:.4}", lattice.offset());
    for code in lattice.points() {
        let s = arithmetic_decode(&model, &opts, *code)?;
        println!("  c={:.4}  {:<14} logprob={:.3}", code.value(), vocab.detokenize(&s.tokens), s.logprob);
    }

    // Each code decodes on its own; the batch is just the lattice above.
    let arith = sample_batch(&model, &opts, Strategy::Arithmetic, 8, 42, 1)?;
    let ances = sample_batch(&model, &opts, Strategy::Ancestral, 8, 42, 1)?;
    let distinct = |v: &[arsample::sampler::DecodedSample]| v.iter().map(|s| s.tokens.clone()).collect::<HashSet<_>>().len();
    println!("distinct sequences: arithmetic {} / ancestral {}", distinct(&arith), distinct(&ances));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
