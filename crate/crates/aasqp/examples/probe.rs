// Exploratory driver for the canned experiments; prints iteration counts.
use aasqp::experiments::{
    comparison_table, run_experiment, scqp_pendulum_experiment, zero_order_experiment,
};

fn main() {
    let dir = std::env::temp_dir().join("aasqp_probe");
    let t0 = std::time::Instant::now();
    let spec = scqp_pendulum_experiment();
    let (results, summary) = run_experiment(&spec, &dir.join("scqp_pendulum"), 1).unwrap();
    println!("scqp_pendulum ({:.2?}):", t0.elapsed());
    println!("{}", comparison_table(&summary));
    for r in &results {
        let series = r.report.residual_series();
        let tail: Vec<String> = series.iter().rev().take(8).rev().map(|v| format!("{v:.2e}")).collect();
        println!("  {}: iters={} err={:?} tail={:?}", r.name, r.report.iterations(), r.error, tail);
    }

    let t0 = std::time::Instant::now();
    let spec = zero_order_experiment();
    let (results, summary) = run_experiment(&spec, &dir.join("zero_order"), 1).unwrap();
    println!("zero_order ({:.2?}):", t0.elapsed());
    println!("{}", comparison_table(&summary));
    for r in &results {
        let series = r.report.residual_series();
        let tail: Vec<String> = series.iter().rev().take(8).rev().map(|v| format!("{v:.2e}")).collect();
        println!("  {}: iters={} err={:?} tail={:?}", r.name, r.report.iterations(), r.error, tail);
    }
}
