// Majority-vote accuracy on a synthetic reasoning task as the number of
// sampled reasoning paths grows.

use arsample::consistency::{is_correct, majority_vote, AnswerExtractor};
use arsample::lm::LanguageModel;
use arsample::metrics::mean_std;
use arsample::sampler::{sample_batch, DecodeOptions, Strategy};
use arsample::seeds::derive_seed_path;
use arsample::toy::ReasoningTask;
use arsample::Result;

pub fn run_example() -> Result<()> {
    let task = ReasoningTask::three_answer(3);
    let vocab = task.vocab();
    let trials = 50;
    for strategy in [Strategy::Arithmetic, Strategy::Ancestral] {
        for n in [1, 5, 20] {
            let mut accs = Vec::with_capacity(trials);
            for trial in 0..trials {
                let mut correct = 0;
                for q in 0..task.questions() {
                    let opts = DecodeOptions::new(task.max_len()).with_prompt(task.prompt(q));
                    let seed = derive_seed_path(17, &[trial as u64, q as u64]);
                    let samples = sample_batch(&task, &opts, strategy, n, seed, 1)?;
                    let vote = majority_vote(&samples, &AnswerExtractor::LastToken, vocab)?;
                    correct += is_correct(&vote, task.gold(q)) as usize;
                }
                accs.push(correct as f64 / task.questions() as f64);
            }
            let (mean, std) = mean_std(&accs)?;
            println!("{strategy:<10} n={n:<3} accuracy={mean:.3} ± {std:.3}");
        }
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
