// Pooled n-gram diversity of arithmetic and ancestral samples.

use arsample::lm::{LanguageModel, TokenId};
use arsample::metrics::{mean_std, ngram_diversity, paired_t_test};
use arsample::sampler::{sample_batch, DecodeOptions, Strategy};
use arsample::toy::ReasoningTask;
use arsample::Result;

pub fn run_example() -> Result<()> {
    let task = ReasoningTask::three_answer(1);
    let opts = DecodeOptions::new(task.max_len()).with_prompt(task.prompt(0));
    let mut scores = [Vec::new(), Vec::new()];
    for seed in 0..100 {
        for (k, strategy) in [Strategy::Arithmetic, Strategy::Ancestral].into_iter().enumerate() {
            let samples = sample_batch(&task, &opts, strategy, 20, seed, 1)?;
            let contents: Vec<&[TokenId]> = samples.iter().map(|s| s.content(task.vocab())).collect();
            scores[k].push(ngram_diversity(&contents)?.d);
        }
    }
    for (name, s) in ["arithmetic", "ancestral"].iter().zip(&scores) {
        let (mean, std) = mean_std(s)?;
        println!("{name:<10} d={mean:.4} ± {std:.4}");
    }
    let t = paired_t_test(&scores[0], &scores[1])?;
    println!("paired t={:.3} p={:.2e}", t.t, t.p);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
