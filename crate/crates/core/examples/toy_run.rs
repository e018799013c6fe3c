//! Trains one arm on the default toy configuration and prints the eval curve.
//!
//! `cargo run --release -p treerpo --example toy_run -- [treerpo|grpo] [seed] [iterations]`

use treerpo::eval_harness::build_eval_set;
use treerpo::trainer::{train, Mode, TrainConfig};

fn main() -> treerpo::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let mode: Mode = args.get(1).map_or(Ok(Mode::TreeRpo), |s| s.parse())?;
    let seed = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let iterations = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(500);
    let cfg = TrainConfig { mode, seed, iterations, eval_every: 20, ..Default::default() };
    let eval_set = build_eval_set(&cfg)?;
    let t0 = std::time::Instant::now();
    let art = train(&cfg, &eval_set)?;
    for (iter, pass1, len) in art.eval_curve() {
        println!("{iter:>5} pass1={pass1:.3} len={len:.2}");
    }
    let used: usize = art.metrics.iter().filter_map(|r| r.samples_used).sum();
    println!("samples used: {used}, elapsed: {:.1}s", t0.elapsed().as_secs_f64());
    Ok(())
}
