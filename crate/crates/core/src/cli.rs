//! `qedbohm run|plot|verify`.
//!
//! Exit codes: 0 success, 1 user/validation error, 2 runtime invariant
//! failure (norm drift, both-pointer events, failed oracles).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::marginals::Coordinate;
use crate::oracles::{all_pass, oracle_battery, Fault};
use crate::pipeline::{run, RunOptions};
use crate::plot::{render, Panel, Series, Table};

pub const THREADS_ENV: &str = "QEDBOHM_THREADS";
pub const MANIFEST: &str = "manifest.txt";

#[derive(Parser, Debug)]
#[command(
    name = "qedbohm",
    version,
    about = "Cavity-QED spectral evolution with Bohmian trajectory ensembles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evolve a scenario, run its trajectory ensemble and export data.
    Run {
        scenario: PathBuf,
        /// Output directory and/or key=value overrides.
        args: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// key=value override (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Disable the pointer coupling.
        #[arg(long)]
        no_measure: bool,
        /// Skip the trajectory ensemble.
        #[arg(long)]
        coefficients_only: bool,
    },
    /// Render SVG plots from the files of a previous run.
    Plot {
        dir: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the oracle battery and print a pass/fail table.
    Verify {
        scenario: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Inject a deliberate fault to exercise the battery.
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
}

/// Run the CLI on `args` (including the program name) and return the exit
/// code. Diagnostics go to `err`, results to `out`.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return 1;
            }
            let _ = write!(out, "{e}");
            return 0;
        }
    };
    let result = match cli.command {
        Command::Run {
            scenario,
            args,
            out: out_dir,
            set,
            seed,
            no_measure,
            coefficients_only,
        } => cmd_run(&scenario, args, out_dir, set, seed, no_measure, coefficients_only, out, err),
        Command::Plot { dir, out: o } => match o.or(dir) {
            Some(d) => cmd_plot(&d, out),
            None => Err(Error::MissingInput(PathBuf::from("<output directory>"))),
        },
        Command::Verify {
            scenario,
            set,
            inject_fault,
        } => cmd_verify(scenario.as_deref(), &set, inject_fault.as_deref(), out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(|n| Some(n.max(1)))
            .map_err(|_| Error::InvalidParameter {
                key: "QEDBOHM_THREADS",
                reason: format!("not a positive integer: {v:?}"),
            }),
        Err(_) => Ok(None),
    }
}

fn load(path: &Path, overrides: &[String]) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::from_file(path)?;
    for o in overrides {
        cfg.apply_override(o)?;
    }
    Ok(cfg)
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    scenario: &Path,
    args: Vec<String>,
    out_dir: Option<PathBuf>,
    set: Vec<String>,
    seed: Option<u64>,
    no_measure: bool,
    coefficients_only: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32> {
    let (assignments, dirs): (Vec<String>, Vec<String>) = args.into_iter().partition(|a| a.contains('='));
    if dirs.len() > 1 || (out_dir.is_some() && !dirs.is_empty()) {
        return Err(Error::InvalidParameter {
            key: "out",
            reason: "more than one output directory given".into(),
        });
    }
    let dir = out_dir
        .or_else(|| dirs.first().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let overrides: Vec<String> = assignments.into_iter().chain(set).collect();
    let mut cfg = load(scenario, &overrides)?;
    if let Some(s) = seed {
        cfg.rng_seed = s;
    }
    if no_measure {
        cfg.measurement_enabled = false;
    }
    let threads = threads_from_env()?;
    let result = run(
        &cfg,
        RunOptions {
            threads,
            coefficients_only,
        },
    )?;
    for w in &result.validation.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    let mut files = result.write_outputs(&dir)?;
    let scn = dir.join("scenario.scn");
    std::fs::write(&scn, result.cfg.to_scenario_string())?;
    files.push(scn);
    write_manifest(&dir, &result.cfg, &files, &result.timings)?;

    let _ = writeln!(out, "config_hash = {}", result.cfg.hash());
    if let Some(t) = result.rabi_period {
        let _ = writeln!(out, "rabi_period = {t:.3} fs");
    }
    let _ = writeln!(out, "norm_drift = {:.3e}", result.unconditional.norm_drift());
    if let Some(ens) = &result.ensemble {
        let _ = writeln!(out, "trajectories = {} (aborted {})", ens.trajectories.len(), ens.n_aborted());
    }
    if let Some(b) = &result.born {
        let _ = writeln!(
            out,
            "y_fraction = {:.4} ± {:.4} (Born {:.4})",
            b.y_fraction,
            b.y_ci3,
            b.expected_y_fraction()
        );
    }
    for (name, secs) in &result.timings {
        let _ = writeln!(out, "time.{name} = {secs:.3} s");
    }
    let _ = writeln!(out, "wrote {} files to {}", files.len() + 1, dir.display());
    let both = result.both_events();
    if both > 0 {
        let _ = writeln!(err, "invariant violated: {both} trajectories displaced both pointers");
        return Ok(2);
    }
    Ok(0)
}

fn digest(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

fn write_manifest(dir: &Path, cfg: &ScenarioConfig, files: &[PathBuf], timings: &[(&'static str, f64)]) -> Result<()> {
    let mut m = String::new();
    m.push_str(&format!("config_hash = {}\n", cfg.hash()));
    m.push_str(&format!("code_version = {}\n", env!("CARGO_PKG_VERSION")));
    m.push_str(&format!("seed = {}\n", cfg.rng_seed));
    for f in files {
        let name = f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        m.push_str(&format!("file.{name} = {}\n", digest(f)?));
    }
    for (name, secs) in timings {
        m.push_str(&format!("time.{name} = {secs:.6}\n"));
    }
    std::fs::write(dir.join(MANIFEST), m)?;
    Ok(())
}

/// Recompute the digests listed in a run's manifest; returns the names of
/// files whose content no longer matches.
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|_| Error::MissingInput(path.clone()))?;
    let mut bad = vec![];
    for line in text.lines() {
        if let Some((k, v)) = line.split_once(" = ") {
            if let Some(name) = k.strip_prefix("file.") {
                let p = dir.join(name);
                if !p.exists() || digest(&p)? != v {
                    bad.push(name.to_string());
                }
            }
        }
    }
    Ok(bad)
}

fn cmd_plot(dir: &Path, out: &mut dyn Write) -> Result<i32> {
    let pops = Table::read(&dir.join("populations.csv"))?;
    let t = pops.column("t")?;
    let mut series = vec![];
    for (label, col) in [("|001>", "p_001"), ("|100>", "p_100"), ("|010>", "p_010"), ("|111>", "p_111")] {
        series.push(Series {
            label: label.into(),
            x: t.clone(),
            y: pops.column(col)?,
        });
    }
    let mut written = vec![];
    let mut save = |name: &str, panels: Vec<Panel>| -> Result<()> {
        std::fs::write(dir.join(name), render(&panels))?;
        written.push(name.to_string());
        Ok(())
    };
    save(
        "populations.svg",
        vec![Panel::Lines {
            title: "Odd-sector populations".into(),
            x_label: "t [fs]".into(),
            y_label: "|c_nmk|²".into(),
            series,
        }],
    )?;

    let en = Table::read(&dir.join("energies.csv"))?;
    let te = en.column("t")?;
    let mut es = vec![];
    for (label, col) in [
        ("H_x1", "e_x1"),
        ("H_x2", "e_x2"),
        ("H_field", "e_field"),
        ("H_int", "e_int"),
        ("total", "e_total"),
    ] {
        es.push(Series {
            label: label.into(),
            x: te.clone(),
            y: en.column(col)?,
        });
    }
    save(
        "energies.svg",
        vec![Panel::Lines {
            title: "Energy expectation values".into(),
            x_label: "t [fs]".into(),
            y_label: "E [eV]".into(),
            series: es,
        }],
    )?;

    let mut panels = vec![];
    for (branch, file) in [("Y", "conditional_y.csv"), ("Z", "conditional_z.csv")] {
        let path = dir.join(file);
        if !path.exists() {
            continue;
        }
        let c = Table::read(&path)?;
        let tc = c.column("t")?;
        let mut s = vec![];
        for (label, col) in [("|001>", "p_001"), ("|100>", "p_100"), ("|010>", "p_010"), ("|111>", "p_111")] {
            s.push(Series {
                label: label.into(),
                x: tc.clone(),
                y: c.column(col)?,
            });
        }
        panels.push(Panel::Lines {
            title: format!("Conditional populations, {branch} branch"),
            x_label: "t [fs]".into(),
            y_label: "|c_nmk|²".into(),
            series: s,
        });
        let mut s = vec![];
        for (label, col) in [("H_x1", "e_x1"), ("H_x2", "e_x2"), ("H_field", "e_field")] {
            s.push(Series {
                label: label.into(),
                x: tc.clone(),
                y: c.column(col)?,
            });
        }
        panels.push(Panel::Lines {
            title: format!("Conditional energies, {branch} branch"),
            x_label: "t [fs]".into(),
            y_label: "E [eV]".into(),
            series: s,
        });
    }
    if !panels.is_empty() {
        save("conditional.svg", panels)?;
    }

    for coord in Coordinate::ALL {
        let path = dir.join(format!("equivariance_{}.csv", coord.name()));
        if !path.exists() {
            continue;
        }
        let h = Table::read(&path)?;
        let lo = h.column("bin_lo")?;
        let hi = h.column("bin_hi")?;
        let emp = h.column("empirical_density")?;
        let ana = h.column("analytic_density")?;
        let mid: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
        save(
            &format!("equivariance_{}.svg", coord.name()),
            vec![Panel::Histogram {
                title: format!("Marginal of {}", coord.name()),
                x_label: coord.name().into(),
                bars: lo.iter().zip(&hi).zip(&emp).map(|((a, b), e)| (*a, *b, *e)).collect(),
                reference: Series {
                    label: "|Φ|² marginal".into(),
                    x: mid,
                    y: ana,
                },
            }],
        )?;
    }
    for name in &written {
        let _ = writeln!(out, "wrote {}", dir.join(name).display());
    }
    Ok(0)
}

fn cmd_verify(scenario: Option<&Path>, set: &[String], fault: Option<&str>, out: &mut dyn Write) -> Result<i32> {
    let cfg = match scenario {
        Some(p) => load(p, set)?,
        None => {
            let mut c = ScenarioConfig::default();
            for o in set {
                c.apply_override(o)?;
            }
            c
        }
    };
    let (cfg, _) = cfg.validated()?;
    let fault = match fault {
        None => None,
        Some("coupling-sign") => Some(Fault::CouplingSign),
        Some(other) => {
            return Err(Error::InvalidParameter {
                key: "inject_fault",
                reason: format!("unknown fault {other:?}"),
            })
        }
    };
    let results = oracle_battery(&cfg, fault)?;
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    for r in &results {
        let verdict = match (r.informational, r.pass) {
            (true, _) => "INFO",
            (false, true) => "PASS",
            (false, false) => "FAIL",
        };
        let _ = writeln!(out, "{verdict}  {:<width$}  {:.3e} (tol {:.1e})", r.name, r.value, r.tolerance);
    }
    Ok(if all_pass(&results) { 0 } else { 2 })
}
