// Minimum Bayes risk selection with n-gram F utility.

use arsample::lm::{LanguageModel, TokenId};
use arsample::mbr::{mbr_select, utility_matrix, UtilityMetric};
use arsample::sampler::{sample_batch, DecodeOptions, Strategy};
use arsample::toy::stationary;
use arsample::Result;

pub fn run_example() -> Result<()> {
    let model = stationary(&["the", "cat", "sat", "</s>"], vec![0.35, 0.3, 0.25, 0.1])?;
    let vocab = model.vocab();
    let samples = sample_batch(&model, &DecodeOptions::new(5), Strategy::Arithmetic, 8, 5, 1)?;
    let candidates: Vec<&[TokenId]> = samples.iter().map(|s| s.content(vocab)).collect();

    let metric = UtilityMetric::NgramF { max_n: 2 };
    let matrix = utility_matrix(&candidates, &metric)?;
    let result = mbr_select(&candidates, &metric)?;
    for (h, c) in candidates.iter().enumerate() {
        let mark = if h == result.winner { "*" } else { " " };
        println!(
            "{mark} {:<22} expected utility {:.3}  self {:.1}",
            vocab.detokenize(c),
            result.expected_utilities[h],
            matrix.get(h, h)
        );
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
