// Temperature, top-k, top-p and epsilon applied to one distribution.

use arsample::lm::TokenDistribution;
use arsample::transforms::{Transform, TransformChain};
use arsample::Result;

pub fn run_example() -> Result<()> {
    let dist = TokenDistribution::new(vec![0.45, 0.25, 0.15, 0.1, 0.05])?;
    let show = |name: &str, d: &TokenDistribution| {
        let probs: Vec<String> = d.probs().iter().map(|p| format!("{p:.3}")).collect();
        println!("{name:<22} [{}]", probs.join(", "));
    };
    show("original", &dist);
    for t in [
        Transform::Temperature(0.5),
        Transform::Temperature(2.0),
        Transform::TopK(2),
        Transform::TopP(0.8),
        Transform::Epsilon(0.12),
    ] {
        show(&format!("{t:?}"), &t.apply(&dist)?);
    }

    // Config form: applied in the order temperature, top_k, top_p, epsilon.
    let chain: TransformChain = serde_json::from_str(r#"{"temperature": 0.8, "top_p": 0.9}"#)?;
    show("temperature+top_p", &chain.apply(&dist)?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
