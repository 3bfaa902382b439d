//! End-to-end scenario run: validate → assemble → evolve → ensemble →
//! observables, plus file export.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::basis::Bases;
use crate::bohmian::{equivariance_check, run_ensemble, Branch, Ensemble, EnsembleOptions};
use crate::config::{rabi_estimate, ScenarioConfig, ValidationReport};
use crate::error::{Error, Result};
use crate::evolution::{evolve, initial_state, CoefficientSeries, InitialSpec};
use crate::hamiltonian::{
    assemble, build_space, correction_report, CorrectionReport, HamiltonianTerms, MeasurementSchedule, MultiIndexSpace,
};
use crate::marginals::{Coordinate, KsResult, MarginalCdf};
use crate::observables::{
    born_summary, conditional_series, detect_rabi_period, exemplar, unconditional_series, BornSummary, BranchCheck, ConditionalSeries,
    UnconditionalSeries,
};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunOptions {
    /// Trajectory worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    /// Skip the trajectory ensemble entirely.
    pub coefficients_only: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EquivarianceRow {
    pub t: f64,
    pub coord: Coordinate,
    pub ks: KsResult,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub cfg: ScenarioConfig,
    pub validation: ValidationReport,
    pub space: MultiIndexSpace,
    pub bases: Bases,
    pub terms: HamiltonianTerms,
    pub schedule: MeasurementSchedule,
    /// Snapshots at the trajectory step.
    pub series: CoefficientSeries,
    /// Snapshots at the output cadence.
    pub records: CoefficientSeries,
    pub unconditional: UnconditionalSeries,
    pub rabi_period: Option<f64>,
    pub corrections: CorrectionReport,
    pub ensemble: Option<Ensemble>,
    pub equivariance: Vec<EquivarianceRow>,
    pub born: Option<BornSummary>,
    /// Exemplar conditional series (first resolved Y, then Z).
    pub conditional: Vec<(ConditionalSeries, BranchCheck)>,
    pub timings: Vec<(&'static str, f64)>,
}

/// Times at which equivariance is tested: quarter, half and full Rabi
/// period, snapped to the nearest record time.
pub fn equivariance_times(cfg: &ScenarioConfig, records: &[f64]) -> Vec<f64> {
    let (_, period) = rabi_estimate(cfg);
    let end = *records.last().unwrap();
    let mut out = vec![];
    for f in [0.25, 0.5, 1.0] {
        let target = f * period;
        if target > end + 0.5 * cfg.output_cadence {
            continue;
        }
        let t = *records
            .iter()
            .min_by(|a, b| (*a - target).abs().total_cmp(&(*b - target).abs()))
            .unwrap();
        if !out.contains(&t) {
            out.push(t);
        }
    }
    out
}

pub fn run(cfg: &ScenarioConfig, opts: RunOptions) -> Result<RunOutput> {
    let mut timings = vec![];
    let clock = Instant::now();
    let (cfg, validation) = cfg.clone().validated()?;
    let space = build_space(&cfg)?;
    let bases = Bases::new(&cfg);
    let terms = assemble(&cfg, &space, &bases)?;
    let schedule = MeasurementSchedule::new(&cfg);
    timings.push(("assemble", clock.elapsed().as_secs_f64()));

    let clock = Instant::now();
    let s0 = initial_state(&space, &bases, &InitialSpec::photon(cfg.pointer_packet_width_modes))?;
    let series = evolve(&terms, &space, &s0, cfg.sim_duration, cfg.dt_coeff, cfg.dt_traj, &schedule)?;
    let stride = (cfg.output_cadence / cfg.dt_traj).round().max(1.0) as usize;
    let records = series.subsample(stride);
    timings.push(("evolve", clock.elapsed().as_secs_f64()));

    let clock = Instant::now();
    let unconditional = unconditional_series(&records, &space, &bases, &terms, &schedule);
    let rabi_period = detect_rabi_period(&unconditional.times, &unconditional.population(&space, 0, 0, 1));
    let corrections = correction_report(&cfg, &bases);
    timings.push(("observables", clock.elapsed().as_secs_f64()));

    let mut out = RunOutput {
        cfg,
        validation,
        space,
        bases,
        terms,
        schedule,
        series,
        records,
        unconditional,
        rabi_period,
        corrections,
        ensemble: None,
        equivariance: vec![],
        born: None,
        conditional: vec![],
        timings,
    };
    if opts.coefficients_only {
        return Ok(out);
    }

    let clock = Instant::now();
    let ens = run_ensemble(
        &out.cfg,
        &out.space,
        &out.bases,
        &out.terms,
        &out.series,
        out.cfg.n_trajectories,
        EnsembleOptions {
            threads: opts.threads,
            frozen: false,
        },
    )?;
    out.timings.push(("ensemble", clock.elapsed().as_secs_f64()));

    let clock = Instant::now();
    for t in equivariance_times(&out.cfg, &ens.times) {
        let c = &out.records.states[out.records.nearest(t)];
        for coord in Coordinate::ALL {
            let ks = equivariance_check(&ens, t, c, &out.space, &out.bases, coord)?;
            out.equivariance.push(EquivarianceRow { t, coord, ks });
        }
    }
    if out.cfg.measurement_enabled {
        out.born = born_summary(&ens, &out.unconditional, &out.space, out.cfg.meas_center_time).ok();
        for b in [Branch::Y, Branch::Z] {
            if let Some(id) = exemplar(&ens, b) {
                let cs = conditional_series(&ens, &out.records, &out.space, &out.bases, &out.terms, id)?;
                let check = cs.check(&out.space, &out.schedule, &out.unconditional);
                out.conditional.push((cs, check));
            }
        }
    }
    out.timings.push(("analysis", clock.elapsed().as_secs_f64()));
    out.ensemble = Some(ens);
    Ok(out)
}

fn create(dir: &Path, name: &str, files: &mut Vec<PathBuf>) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path)?;
    files.push(path);
    Ok(BufWriter::new(f))
}

/// Record used for the per-coordinate histogram export.
fn histogram_time(out: &RunOutput) -> Option<f64> {
    let rows = &out.equivariance;
    let (_, period) = rabi_estimate(&out.cfg);
    rows.iter()
        .map(|r| r.t)
        .min_by(|a, b| (a - 0.5 * period).abs().total_cmp(&(b - 0.5 * period).abs()))
}

const HISTOGRAM_BINS: usize = 40;

impl RunOutput {
    /// Resolved-branch verdict: number of trajectories with both pointers
    /// displaced.
    pub fn both_events(&self) -> usize {
        self.ensemble.as_ref().map_or(0, |e| e.count(Branch::Both))
    }

    /// Write all data files into `dir`; returns the paths written.
    pub fn write_outputs(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut files = vec![];
        self.unconditional
            .write_populations(&self.space, create(dir, "populations.csv", &mut files)?)?;
        self.unconditional.write_energies(create(dir, "energies.csv", &mut files)?)?;
        {
            let mut w = create(dir, "summary.txt", &mut files)?;
            self.write_summary(&mut w)?;
        }
        if let Some(ens) = &self.ensemble {
            ens.write_csv(create(dir, "trajectories.csv", &mut files)?)?;
            let mut w = create(dir, "equivariance.csv", &mut files)?;
            writeln!(w, "t,coordinate,ks,threshold,n,pass")?;
            for r in &self.equivariance {
                writeln!(
                    w,
                    "{:e},{},{:e},{:e},{},{}",
                    r.t,
                    r.coord.name(),
                    r.ks.statistic,
                    r.ks.threshold,
                    r.ks.n,
                    r.ks.pass
                )?;
            }
            drop(w);
            if let Some(t) = histogram_time(self) {
                for coord in Coordinate::ALL {
                    let mut w = create(dir, &format!("equivariance_{}.csv", coord.name()), &mut files)?;
                    self.write_histogram(ens, t, coord, &mut w)?;
                }
            }
            if self.cfg.measurement_enabled {
                let mut w = create(dir, "branch_summary.txt", &mut files)?;
                self.write_branch_summary(ens, &mut w)?;
                for (cs, _) in &self.conditional {
                    let name = format!("conditional_{}.csv", cs.branch.name());
                    cs.write_csv(&self.space, create(dir, &name, &mut files)?)?;
                }
            }
        }
        Ok(files)
    }

    fn write_summary(&self, w: &mut impl Write) -> std::io::Result<()> {
        let u = &self.unconditional;
        let v = &self.validation;
        let c = &self.corrections;
        writeln!(w, "config_hash = {}", self.cfg.hash())?;
        writeln!(w, "flat_size = {}", self.space.flat_size)?;
        writeln!(w, "e0 = {:e}", self.bases.well.energy(0))?;
        writeln!(w, "gap = {:e}", self.bases.well.energy(1) - self.bases.well.energy(0))?;
        writeln!(w, "resonance_detuning = {:e}", v.resonance_detuning)?;
        let (omega, period) = rabi_estimate(&self.cfg);
        writeln!(w, "rabi_omega_estimate = {omega:e}")?;
        writeln!(w, "rabi_period_estimate = {period:e}")?;
        match self.rabi_period {
            Some(t) => writeln!(w, "rabi_period_detected = {t:e}")?,
            None => writeln!(w, "rabi_period_detected = none")?,
        }
        writeln!(w, "norm_drift = {:e}", u.norm_drift())?;
        writeln!(w, "total_energy_drift = {:e}", u.total_energy_drift())?;
        writeln!(w, "max_even_probability = {:e}", u.max_even_probability())?;
        writeln!(w, "tau_ratio = {:e}", c.tau_ratio)?;
        writeln!(w, "collective_ratio = {:e}", c.collective_ratio)?;
        writeln!(w, "diag_shift_quadratic = {:e}", c.diag_shift_quadratic)?;
        writeln!(w, "diag_shift_dipole = {:e}", c.diag_shift_dipole)?;
        writeln!(w, "corrections_negligible = {}", c.negligible)?;
        writeln!(w, "sigma0 = {:e}", v.sigma0)?;
        for warning in &v.warnings {
            writeln!(w, "warning = {warning}")?;
        }
        Ok(())
    }

    fn write_branch_summary(&self, ens: &Ensemble, w: &mut impl Write) -> std::io::Result<()> {
        let n_y = ens.count(Branch::Y);
        let n_z = ens.count(Branch::Z);
        let neither = ens.count(Branch::Neither);
        let both = ens.count(Branch::Both);
        let resolved = n_y + n_z;
        writeln!(w, "n_total = {}", ens.trajectories.len())?;
        writeln!(w, "n_y_branch = {n_y}")?;
        writeln!(w, "n_z_branch = {n_z}")?;
        writeln!(w, "n_unresolved = {}", neither + both)?;
        writeln!(w, "n_aborted = {}", ens.n_aborted())?;
        let frac = if resolved > 0 { n_y as f64 / resolved as f64 } else { f64::NAN };
        writeln!(w, "y_fraction = {frac:e}")?;
        let t_ks = histogram_time(self);
        for coord in Coordinate::ALL {
            let ks = self
                .equivariance
                .iter()
                .find(|r| Some(r.t) == t_ks && r.coord == coord)
                .map_or(f64::NAN, |r| r.ks.statistic);
            writeln!(w, "ks_{} = {ks:e}", coord.name())?;
        }
        writeln!(w, "ks_time = {:e}", t_ks.unwrap_or(f64::NAN))?;
        writeln!(w, "n_neither = {neither}")?;
        writeln!(w, "n_both = {both}")?;
        if let Some(b) = &self.born {
            writeln!(w, "y_fraction_ci3 = {:e}", b.y_ci3)?;
            writeln!(w, "born_y = {:e}", b.born_y)?;
            writeln!(w, "born_z = {:e}", b.born_z)?;
            writeln!(w, "born_time = {:e}", b.t_meas)?;
        }
        writeln!(w, "threshold = {:e}", ens.threshold.unwrap_or(f64::NAN))?;
        writeln!(w, "node_events = {}", ens.node_events())?;
        writeln!(w, "guidance = {}", ens.law.name())?;
        for (cs, check) in &self.conditional {
            let b = cs.branch.name();
            writeln!(w, "exemplar_{b} = {}", cs.traj_id)?;
            writeln!(w, "exemplar_{b}_t_check = {:e}", check.t_check)?;
            writeln!(w, "exemplar_{b}_population = {:e}", check.recorded_population)?;
            writeln!(w, "exemplar_{b}_energy = {:e}", check.recorded_energy)?;
            writeln!(w, "exemplar_{b}_pre_window_deviation = {:e}", check.pre_window_deviation)?;
        }
        for tr in ens.trajectories.iter().filter(|t| t.aborted.is_some()) {
            writeln!(w, "aborted_{} = {}", tr.id, tr.aborted.as_deref().unwrap_or(""))?;
        }
        Ok(())
    }

    fn write_histogram(&self, ens: &Ensemble, t: f64, coord: Coordinate, w: &mut impl Write) -> Result<()> {
        let i = ens.record_index(t).ok_or(Error::MismatchedTimes { ensemble: t, state: t })?;
        let samples = ens.column(i, coord);
        let c = &self.records.states[self.records.nearest(t)];
        let m = MarginalCdf::new(c, &self.space, &self.bases, coord);
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        let width = (hi - lo) / HISTOGRAM_BINS as f64;
        let mut counts = vec![0usize; HISTOGRAM_BINS];
        for s in &samples {
            let b = (((s - lo) / width) as usize).min(HISTOGRAM_BINS - 1);
            counts[b] += 1;
        }
        writeln!(w, "# t = {t:e}, coordinate = {}", coord.name())?;
        writeln!(w, "bin_lo,bin_hi,empirical_density,analytic_density")?;
        let n = samples.len() as f64;
        for (b, count) in counts.iter().enumerate() {
            let a = lo + b as f64 * width;
            let z = a + width;
            let analytic = (m.cdf(z) - m.cdf(a)) / width;
            writeln!(w, "{a:e},{z:e},{:e},{analytic:e}", *count as f64 / (n * width))?;
        }
        Ok(())
    }
}
