// Enumerate the interval codebook of a tiny model and check it.

use arsample::lm::{LanguageModel, DEFAULT_ENUMERATION_CAP};
use arsample::oracle::{check_codebook, stratification_violations};
use arsample::sampler::{enumerate_codebook, make_lattice, DecodeOptions, VocabOrder};
use arsample::toy::stationary;
use arsample::transforms::{Transform, TransformChain};
use arsample::Result;

pub fn run_example() -> Result<()> {
    let model = stationary(&["A", "B", "</s>"], vec![0.5, 0.3, 0.2])?;
    let opts = DecodeOptions::new(2)
        .with_chain(TransformChain::new(vec![Transform::Temperature(0.7)])?)
        .with_vocab_order(VocabOrder::Seeded(3));

    let book = enumerate_codebook(&model, &opts)?;
    for e in &book {
        println!("[{:.4}, {:.4})  {}", e.lo, e.hi, model.vocab().detokenize(&e.tokens));
    }

    let report = check_codebook(&model, &opts, 1000, 7, DEFAULT_ENUMERATION_CAP)?;
    println!(
        "{} entries, gap {:.1e}, max width error {:.1e}, {} / {} codes mismatched",
        report.entries, report.total_gap, report.max_width_error, report.mismatches, report.codes_checked
    );
    let lattice = make_lattice(10, 1)?;
    println!("stratification violations at n=10: {}", stratification_violations(&book, &lattice).len());
    report.into_result().map(|_| ())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
