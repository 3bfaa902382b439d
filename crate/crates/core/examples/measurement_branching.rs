//! Pointer readout halfway through the first Rabi cycle. Each trajectory
//! moves at most one pointer; the conditional wavefunction along a
//! trajectory then follows the branch that pointer recorded.
//!
//! `cargo run --release --example measurement_branching -- [n_trajectories]`

use qedbohm::bohmian::Branch;
use qedbohm::config::ScenarioConfig;
use qedbohm::pipeline::{run, RunOptions};

fn main() -> qedbohm::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(150);
    let cfg = ScenarioConfig {
        n_trajectories: n,
        ..ScenarioConfig::measured()
    };
    let out = run(&cfg, RunOptions::default())?;
    let ens = out.ensemble.as_ref().expect("measured run has an ensemble");

    println!("branch threshold {:.1} nm", ens.threshold.unwrap_or(f64::NAN));
    for b in [Branch::Y, Branch::Z, Branch::Neither, Branch::Both] {
        println!("{:>8}: {}", b.name(), ens.count(b));
    }
    println!("aborted: {}", ens.n_aborted());

    for (series, check) in &out.conditional {
        println!(
            "{} exemplar (trajectory {}): population {:.3}, energy {:.4} eV at t = {:.2} fs, \
             pre-window deviation {:.2e}",
            check.branch.name(),
            series.traj_id,
            check.recorded_population,
            check.recorded_energy,
            check.t_check,
            check.pre_window_deviation
        );
    }
    Ok(())
}
