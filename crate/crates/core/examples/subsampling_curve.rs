// Accuracy at every divisor of the pool size, from one pool per instance.

use arsample::consistency::{is_correct, majority_vote, AnswerExtractor};
use arsample::lm::LanguageModel;
use arsample::sampler::{sample_batch, DecodeOptions, DecodedSample, Strategy};
use arsample::subsample::{subsample_curve, SubsamplePlan};
use arsample::toy::ReasoningTask;
use arsample::Result;

pub fn run_example() -> Result<()> {
    let task = ReasoningTask::three_answer(12);
    let n = 20;
    for strategy in [Strategy::Arithmetic, Strategy::Ancestral] {
        let pools = (0..task.questions())
            .map(|q| {
                let opts = DecodeOptions::new(task.max_len()).with_prompt(task.prompt(q));
                sample_batch(&task, &opts, strategy, n, q as u64, 1)
            })
            .collect::<Result<Vec<_>>>()?;
        let plan = SubsamplePlan::new(n, 20, strategy, 0)?;
        let accuracy = |i: usize, sub: &[DecodedSample]| {
            let vote = majority_vote(sub, &AnswerExtractor::LastToken, task.vocab())?;
            Ok(if is_correct(&vote, task.gold(i)) { 1.0 } else { 0.0 })
        };
        for row in subsample_curve(&pools, &plan, accuracy)? {
            println!("{:<10} d={:<3} {:.3} ± {:.3}", row.strategy, row.d, row.mean, row.std);
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
