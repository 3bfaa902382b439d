//! Vacuum Rabi oscillation of the two-electron/one-photon system without
//! pointers: coefficient evolution only, no trajectories.

use qedbohm::config::{rabi_estimate, ScenarioConfig};
use qedbohm::pipeline::{run, RunOptions};

fn main() -> qedbohm::Result<()> {
    let cfg = ScenarioConfig::unmeasured();
    let out = run(
        &cfg,
        RunOptions {
            coefficients_only: true,
            ..Default::default()
        },
    )?;
    let u = &out.unconditional;
    let p001 = u.population(&out.space, 0, 0, 1);
    let p100 = u.population(&out.space, 1, 0, 0);
    let p010 = u.population(&out.space, 0, 1, 0);
    let p111 = u.population(&out.space, 1, 1, 1);

    println!("{:>8} {:>8} {:>8} {:>8} {:>8}", "t [fs]", "|001>", "|100>", "|010>", "|111>");
    for i in (0..u.times.len()).step_by(40) {
        println!("{:8.2} {:8.4} {:8.4} {:8.4} {:8.4}", u.times[i], p001[i], p100[i], p010[i], p111[i]);
    }
    let (omega, estimate) = rabi_estimate(&cfg);
    println!("Ω_R = {omega:.5} rad/fs, 2π/Ω_R = {estimate:.2} fs");
    match out.rabi_period {
        Some(t) => println!("first return of |001> at {t:.2} fs"),
        None => println!("no return of |001> within {} fs", cfg.sim_duration),
    }
    println!("norm drift {:.2e}, energy drift {:.2e} eV", u.norm_drift(), u.total_energy_drift());
    Ok(())
}
