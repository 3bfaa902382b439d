//! Branch frequencies of a measured ensemble against the Born weights of the
//! two odd-sector outcomes at the centre of the pointer window.
//!
//! `cargo run --release --example born_rule_ensemble -- [n_trajectories] [seed]`

use qedbohm::config::ScenarioConfig;
use qedbohm::pipeline::{run, RunOptions};

fn main() -> qedbohm::Result<()> {
    let mut args = std::env::args().skip(1);
    let n = args.next().and_then(|s| s.parse().ok()).unwrap_or(300);
    let mut cfg = ScenarioConfig {
        n_trajectories: n,
        ..ScenarioConfig::measured()
    };
    if let Some(seed) = args.next().and_then(|s| s.parse().ok()) {
        cfg.rng_seed = seed;
    }
    let out = run(&cfg, RunOptions::default())?;
    let b = out.born.expect("measured run");
    println!(
        "Born weights at t = {:.2} fs: |100> {:.4}, |010> {:.4}",
        b.t_meas, b.born_y, b.born_z
    );
    println!(
        "resolved {} of {} ({} neither, {} both, {} aborted)",
        b.n_resolved(),
        b.n_total,
        b.n_neither,
        b.n_both,
        b.n_aborted
    );
    println!(
        "y fraction {:.4} ± {:.4} (3σ), expected {:.4}",
        b.y_fraction,
        b.y_ci3,
        b.expected_y_fraction()
    );
    let inside = (b.y_fraction - b.expected_y_fraction()).abs() <= b.y_ci3;
    println!("within interval: {inside}");
    Ok(())
}
