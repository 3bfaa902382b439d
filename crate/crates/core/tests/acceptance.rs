//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the lines are always printed. A
//! criterion that is not met prints FAIL without aborting the target; the
//! process fails only if a computation itself errors.

use std::time::Instant;

use qedbohm::basis::Bases;
use qedbohm::bohmian::Branch;
use qedbohm::config::ScenarioConfig;
use qedbohm::hamiltonian::correction_report;
use qedbohm::marginals::{Coordinate, KS_CRITICAL};
use qedbohm::oracles::oracle_battery;
use qedbohm::pipeline::{run, RunOptions, RunOutput};

const N_TRAJ: usize = 1000;

struct Line {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn report(lines: &mut Vec<Line>, id: usize, name: &'static str, pass: bool, detail: String) {
    println!("{} criterion {id:>2} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    lines.push(Line { id, name, pass, detail });
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

fn resonance(lines: &mut Vec<Line>) {
    let cfg = ScenarioConfig::default();
    let b = Bases::new(&cfg);
    let e0 = b.well.energy(0);
    let gap = b.well.energy(1) - e0;
    let pass = within(gap, 0.105, 0.005 * 0.105) && within(e0, 0.035, 0.005 * 0.035);
    report(
        lines,
        1,
        "resonance",
        pass,
        format!("E1-E0 = {gap:.6} eV (0.105 ± 0.5%), E0 = {e0:.6} eV (0.035 ± 0.5%)"),
    );
}

fn unmeasured(lines: &mut Vec<Line>) -> qedbohm::Result<()> {
    let cfg = ScenarioConfig {
        n_trajectories: N_TRAJ,
        ..ScenarioConfig::unmeasured()
    };
    let clock = Instant::now();
    let out = run(&cfg, RunOptions::default())?;
    let evolve_secs = out.timings.iter().filter(|(n, _)| *n != "ensemble").map(|(_, s)| s).sum::<f64>();
    let u = &out.unconditional;

    let period = out.rabi_period;
    let (i_half, t_half) = match period {
        Some(p) => {
            let i = u.index_at(p / 2.0);
            (i, u.times[i])
        }
        None => (0, f64::NAN),
    };
    let p100 = u.population(&out.space, 1, 0, 0)[i_half];
    let p010 = u.population(&out.space, 0, 1, 0)[i_half];
    let period_ok = period.is_some_and(|p| within(p, 115.0, 0.05 * 115.0));
    let pass = period_ok && within(p100, 0.5, 0.02) && within(p010, 0.5, 0.02);
    report(
        lines,
        2,
        "rabi dynamics",
        pass,
        format!(
            "T_R = {:.3} fs (115 ± 5%), at t = {t_half:.3} fs |c100|² = {p100:.4}, |c010|² = {p010:.4} (0.5 ± 0.02); coefficients {evolve_secs:.2} s (< 10 s)",
            period.unwrap_or(f64::NAN)
        ),
    );

    let e1 = u.e_x1[i_half];
    let e2 = u.e_x2[i_half];
    let drift = u.total_energy_drift();
    let pass = within(e1, 0.087, 0.005) && within(e2, 0.087, 0.005) && drift <= 1e-6;
    report(
        lines,
        3,
        "energy bookkeeping",
        pass,
        format!(
            "<H_x1> = {e1:.5} eV, <H_x2> = {e2:.5} eV (0.087 ± 0.005); total energy drift over {:.0} fs = {drift:.3e} eV (≤ 1e-6)",
            cfg.sim_duration
        ),
    );

    let even = u.max_even_probability();
    report(
        lines,
        4,
        "parity superselection",
        even < 1e-12,
        format!("max even-sector probability = {even:.3e} (< 1e-12)"),
    );

    let norm = u.norm_drift();
    report(
        lines,
        5,
        "unitarity",
        norm <= 1e-8,
        format!("norm drift over {:.0} fs = {norm:.3e} (≤ 1e-8)", cfg.sim_duration),
    );

    let ens = out.ensemble.as_ref().expect("ensemble requested");
    let t_ks = period.map(|p| p / 2.0).unwrap_or(f64::NAN);
    let row_t = out
        .equivariance
        .iter()
        .map(|r| r.t)
        .min_by(|a, b| (a - t_ks).abs().total_cmp(&(b - t_ks).abs()))
        .unwrap_or(f64::NAN);
    let n_done = ens.completed().count();
    let crit = KS_CRITICAL / (n_done as f64).sqrt();
    let mut parts = vec![];
    let mut pass = n_done == N_TRAJ;
    for coord in Coordinate::ALL {
        match out.equivariance.iter().find(|r| r.t == row_t && r.coord == coord) {
            Some(r) => {
                pass &= r.ks.statistic < crit;
                parts.push(format!("{} {:.4}", coord.name(), r.ks.statistic));
            }
            None => {
                pass = false;
                parts.push(format!("{} missing", coord.name()));
            }
        }
    }
    report(
        lines,
        8,
        "equivariance",
        pass,
        format!(
            "t = {row_t:.3} fs, n = {n_done}, KS: {} (< {crit:.4}); {:.1} s total",
            parts.join(", "),
            clock.elapsed().as_secs_f64()
        ),
    );
    Ok(())
}

fn measured(lines: &mut Vec<Line>) -> qedbohm::Result<()> {
    let cfg = ScenarioConfig {
        n_trajectories: N_TRAJ,
        ..ScenarioConfig::measured()
    };
    let clock = Instant::now();
    let out: RunOutput = run(&cfg, RunOptions::default())?;
    let secs = clock.elapsed().as_secs_f64();
    let evolve_secs = out
        .timings
        .iter()
        .find(|(n, _)| *n == "evolve")
        .map(|(_, s)| *s)
        .unwrap_or(f64::NAN);

    let mut pass = true;
    let mut parts = vec![];
    for branch in [Branch::Y, Branch::Z] {
        match out.conditional.iter().find(|(_, c)| c.branch == branch) {
            Some((s, c)) => {
                pass &= c.recorded_population >= 0.95 && within(c.recorded_energy, 0.140, 0.01);
                parts.push(format!(
                    "{} (trajectory {}, t = {:.2} fs): population {:.4} (≥ 0.95), energy {:.4} eV (0.140 ± 0.01)",
                    branch.name(),
                    s.traj_id,
                    c.t_check,
                    c.recorded_population,
                    c.recorded_energy
                ));
            }
            None => {
                pass = false;
                parts.push(format!("{} exemplar missing", branch.name()));
            }
        }
    }
    report(
        lines,
        6,
        "measurement branching",
        pass,
        format!(
            "{}; coefficient evolution {evolve_secs:.2} s on {} states",
            parts.join("; "),
            out.space.flat_size
        ),
    );

    let b = out.born.as_ref().expect("measured run");
    let pass = within(b.y_fraction, 0.5, 0.047) && b.n_both == 0;
    report(
        lines,
        7,
        "born rule / partition noise",
        pass,
        format!(
            "y fraction {:.4} of {} resolved (0.5 ± 0.047), both-pointer events {} (= 0), neither {}, aborted {}; {secs:.1} s",
            b.y_fraction,
            b.n_resolved(),
            b.n_both,
            b.n_neither,
            b.n_aborted
        ),
    );
    Ok(())
}

fn oracles(lines: &mut Vec<Line>) -> qedbohm::Result<()> {
    let clock = Instant::now();
    let results = oracle_battery(&ScenarioConfig::default(), None)?;
    let secs = clock.elapsed().as_secs_f64();
    let groups: [(&str, fn(&str) -> bool, f64); 5] = [
        ("dense (8-dim)", |n| n.starts_with("dense vs sparse H (system space"), 1e-14),
        ("quadrature", |n| n.contains("quadrature") || n.contains("orthonormal"), 1e-10),
        ("ladder", |n| n.contains("exact"), 0.0),
        ("derivatives", |n| n.contains("finite differences"), 1e-6),
        ("continuity", |n| n.starts_with("continuity"), 1e-5),
    ];
    let mut pass = secs < 60.0;
    let mut parts = vec![];
    for (label, select, tol) in groups {
        let gated: Vec<_> = results.iter().filter(|r| !r.informational && select(&r.name)).collect();
        let worst = gated.iter().map(|r| r.value).fold(0.0, f64::max);
        let ok = !gated.is_empty() && gated.iter().all(|r| r.value <= tol);
        pass &= ok;
        parts.push(format!("{label} {worst:.1e} (≤ {tol:.0e}, {} checks)", gated.len()));
    }
    report(
        lines,
        9,
        "oracle battery",
        pass,
        format!("{}; {secs:.2} s (< 60 s)", parts.join(", ")),
    );
    Ok(())
}

fn corrections(lines: &mut Vec<Line>) {
    let cfg = ScenarioConfig::default();
    let r = correction_report(&cfg, &Bases::new(&cfg));
    report(
        lines,
        10,
        "dropped-term report",
        within(r.tau_ratio, 8.0, 1.0),
        format!(
            "tau_xx/tau_R = {:.3} (8 ± 1); collective Omega_R/Omega_xx = {:.3}",
            r.tau_ratio, r.collective_ratio
        ),
    );
}

fn main() {
    let mut lines = vec![];
    resonance(&mut lines);
    corrections(&mut lines);
    let stages: [(&str, fn(&mut Vec<Line>) -> qedbohm::Result<()>); 3] = [
        ("oracle battery", oracles),
        ("unmeasured run", unmeasured),
        ("measured run", measured),
    ];
    let mut errors = 0;
    for (what, stage) in stages {
        if let Err(e) = stage(&mut lines) {
            println!("ERROR {what}: {e}");
            errors += 1;
        }
    }
    lines.sort_by_key(|l| l.id);
    let passed = lines.iter().filter(|l| l.pass).count();
    println!("\nacceptance summary: {passed}/{} criteria pass", lines.len());
    for l in lines.iter().filter(|l| !l.pass) {
        println!("  not met: {} {} ({})", l.id, l.name, l.detail);
    }
    if errors > 0 {
        std::process::exit(1);
    }
}
