// Paired t-test on per-instance scores.

use arsample::metrics::paired_t_test;
use arsample::Result;

pub fn run_example() -> Result<()> {
    let a = [0.9, 0.8, 0.7];
    let b = [0.8, 0.7, 0.7];
    let r = paired_t_test(&a, &b)?;
    println!("t={:.4} dof={} p={:.4} mean_diff={:.4}", r.t, r.dof, r.p, r.mean_diff);

    let same = paired_t_test(&a, &a)?;
    println!("identical inputs: t={} p={}", same.t, same.p);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
