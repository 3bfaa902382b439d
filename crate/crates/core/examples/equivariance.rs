//! Equivariance: trajectories sampled from |Φ(0)|² stay |Φ(t)|²-distributed.
//! Kolmogorov–Smirnov distance of every marginal at a quarter, half and one
//! Rabi period.
//!
//! `cargo run --release --example equivariance -- [n_trajectories]`

use qedbohm::config::ScenarioConfig;
use qedbohm::pipeline::{run, RunOptions};

fn main() -> qedbohm::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(400);
    let cfg = ScenarioConfig {
        n_trajectories: n,
        ..ScenarioConfig::unmeasured()
    };
    let out = run(&cfg, RunOptions::default())?;
    println!("{:>8} {:>5} {:>8} {:>8}", "t [fs]", "coord", "D", "D_crit");
    for row in &out.equivariance {
        println!(
            "{:8.2} {:>5} {:8.4} {:8.4} {}",
            row.t,
            row.coord.name(),
            row.ks.statistic,
            row.ks.threshold,
            if row.ks.pass { "" } else { "reject" }
        );
    }
    Ok(())
}
