//! Derived observables: population and energy series, Rabi period,
//! conditional (single-trajectory) analyses and branch statistics.

use std::io::Write;

use num_complex::Complex64;

use crate::basis::Bases;
use crate::bohmian::{Branch, Ensemble};
use crate::error::{Error, Result};
use crate::evolution::{system_populations, CoefficientSeries};
use crate::hamiltonian::{Coupling, HamiltonianTerms, MeasurementSchedule, MultiIndexSpace};
use crate::wavefield::{conditional_coefficients, conditional_energy, interaction_energy, EnergyTerm};

/// Closeness to 1 of |c_001|² that counts as a return of the photon.
pub const RABI_RETURN_TOL: f64 = 0.02;

/// "|nmk>" label of a system index.
pub fn ket_label(space: &MultiIndexSpace, j: usize) -> String {
    let (n, m, k) = space.system_index(j);
    format!("|{n}{m}{k}>")
}

fn column_label(space: &MultiIndexSpace, j: usize) -> String {
    let (n, m, k) = space.system_index(j);
    format!("p_{n}{m}{k}")
}

/// Re⟨c|V|c⟩ for system-level couplings acting on whole pointer blocks.
pub fn block_interaction(c: &[Complex64], couplings: &[Coupling], block: usize) -> f64 {
    couplings
        .iter()
        .map(|cp| {
            let a = &c[cp.row * block..(cp.row + 1) * block];
            let b = &c[cp.col * block..(cp.col + 1) * block];
            cp.value * a.iter().zip(b).map(|(x, y)| (x.conj() * y).re).sum::<f64>()
        })
        .sum()
}

/// Populations and energies of the full state versus time.
#[derive(Clone, Debug, PartialEq)]
pub struct UnconditionalSeries {
    pub times: Vec<f64>,
    /// Per time, |c_nmk|² summed over pointer modes, indexed by system index.
    pub populations: Vec<Vec<f64>>,
    pub e_x1: Vec<f64>,
    pub e_x2: Vec<f64>,
    pub e_field: Vec<f64>,
    pub e_int: Vec<f64>,
    /// ⟨H(t)⟩ including interaction, pointers and measurement coupling.
    pub e_total: Vec<f64>,
    pub norm: Vec<f64>,
    pub even_probability: Vec<f64>,
}

pub fn unconditional_series(
    series: &CoefficientSeries,
    space: &MultiIndexSpace,
    bases: &Bases,
    terms: &HamiltonianTerms,
    schedule: &MeasurementSchedule,
) -> UnconditionalSeries {
    let mut out = UnconditionalSeries {
        times: series.times.clone(),
        populations: Vec::with_capacity(series.len()),
        e_x1: vec![],
        e_x2: vec![],
        e_field: vec![],
        e_int: vec![],
        e_total: vec![],
        norm: vec![],
        even_probability: vec![],
    };
    for (t, c) in series.times.iter().zip(&series.states) {
        let pops = system_populations(c, space);
        let energy = |which| {
            conditional_energy(
                &pops.iter().map(|p| Complex64::new(p.sqrt(), 0.0)).collect::<Vec<_>>(),
                space,
                bases,
                which,
            )
        };
        out.e_x1.push(energy(EnergyTerm::X1));
        out.e_x2.push(energy(EnergyTerm::X2));
        out.e_field.push(energy(EnergyTerm::Field));
        let block = space.block();
        out.e_int
            .push(block_interaction(c, &terms.system_x1, block) + block_interaction(c, &terms.system_x2, block));
        out.e_total.push(terms.expectation(c, schedule.mu(*t)).re);
        out.norm.push(pops.iter().sum());
        out.even_probability.push(space.even_probability(c));
        out.populations.push(pops);
    }
    out
}

impl UnconditionalSeries {
    pub fn population(&self, space: &MultiIndexSpace, n: usize, m: usize, k: usize) -> Vec<f64> {
        let j = space.system_flat(n, m, k);
        self.populations.iter().map(|p| p[j]).collect()
    }

    pub fn index_at(&self, t: f64) -> usize {
        let i = self.times.partition_point(|&s| s < t).min(self.times.len() - 1);
        if i > 0 && (self.times[i - 1] - t).abs() <= (self.times[i] - t).abs() {
            i - 1
        } else {
            i
        }
    }

    /// Largest |‖c(t)‖² − ‖c(0)‖²|.
    pub fn norm_drift(&self) -> f64 {
        self.norm.iter().map(|n| (n - self.norm[0]).abs()).fold(0.0, f64::max)
    }

    pub fn total_energy_drift(&self) -> f64 {
        self.e_total.iter().map(|e| (e - self.e_total[0]).abs()).fold(0.0, f64::max)
    }

    pub fn max_even_probability(&self) -> f64 {
        self.even_probability.iter().copied().fold(0.0, f64::max)
    }

    pub fn write_populations(&self, space: &MultiIndexSpace, mut w: impl Write) -> std::io::Result<()> {
        write!(w, "t")?;
        for j in 0..space.n_system() {
            write!(w, ",{}", column_label(space, j))?;
        }
        writeln!(w, ",total")?;
        for (t, p) in self.times.iter().zip(&self.populations) {
            write!(w, "{t:e}")?;
            for x in p {
                write!(w, ",{x:e}")?;
            }
            writeln!(w, ",{:e}", p.iter().sum::<f64>())?;
        }
        Ok(())
    }

    pub fn write_energies(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "t,e_x1,e_x2,e_field,e_int,e_total,norm,even_probability")?;
        for i in 0..self.times.len() {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                self.times[i],
                self.e_x1[i],
                self.e_x2[i],
                self.e_field[i],
                self.e_int[i],
                self.e_total[i],
                self.norm[i],
                self.even_probability[i]
            )?;
        }
        Ok(())
    }
}

/// Rabi period from the first return of `p` (starting near 1) to within
/// [`RABI_RETURN_TOL`] of 1, refined to the local maximum of that return by
/// a parabola through the three highest samples.
pub fn detect_rabi_period(times: &[f64], p: &[f64]) -> Option<f64> {
    let dipped = p.iter().position(|&x| x < 1.0 - RABI_RETURN_TOL)?;
    let back = dipped + p[dipped..].iter().position(|&x| x >= 1.0 - RABI_RETURN_TOL)?;
    let mut i = back;
    while i + 1 < p.len() && p[i + 1] >= p[i] {
        i += 1;
    }
    if i == 0 || i + 1 >= p.len() {
        return Some(times[i]);
    }
    let (t0, t1, t2) = (times[i - 1], times[i], times[i + 1]);
    let (y0, y1, y2) = (p[i - 1], p[i], p[i + 1]);
    // Vertex of the interpolating parabola on a possibly uneven grid.
    let d01 = (y1 - y0) / (t1 - t0);
    let d12 = (y2 - y1) / (t2 - t1);
    let a = (d12 - d01) / (t2 - t0);
    if !(a < 0.0) {
        return Some(t1);
    }
    let b = d01 - a * (t0 + t1);
    Some(-b / (2.0 * a))
}

/// Observables of the conditional wave function along one trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalSeries {
    pub traj_id: usize,
    pub branch: Branch,
    pub times: Vec<f64>,
    pub pointer: Vec<(f64, f64)>,
    pub populations: Vec<Vec<f64>>,
    pub e_x1: Vec<f64>,
    pub e_x2: Vec<f64>,
    pub e_field: Vec<f64>,
    /// Interaction energy of the conditional state, reported separately.
    pub e_int: Vec<f64>,
    pub raw_norm: Vec<f64>,
}

/// Conditional series along trajectory `traj_id`. `series` must contain a
/// snapshot at every record time of the ensemble.
pub fn conditional_series(
    ens: &Ensemble,
    series: &CoefficientSeries,
    space: &MultiIndexSpace,
    bases: &Bases,
    terms: &HamiltonianTerms,
    traj_id: usize,
) -> Result<ConditionalSeries> {
    let tr = ens
        .trajectories
        .get(traj_id)
        .ok_or_else(|| Error::Insufficient(format!("no trajectory {traj_id}")))?;
    if tr.aborted.is_some() || !matches!(tr.branch, Branch::Y | Branch::Z) {
        return Err(Error::Insufficient(format!(
            "trajectory {traj_id} is not resolved ({})",
            tr.branch.name()
        )));
    }
    let mut out = ConditionalSeries {
        traj_id,
        branch: tr.branch,
        times: ens.times.clone(),
        pointer: vec![],
        populations: vec![],
        e_x1: vec![],
        e_x2: vec![],
        e_field: vec![],
        e_int: vec![],
        raw_norm: vec![],
    };
    for (t, p) in ens.times.iter().zip(&tr.points) {
        let i = series.nearest(*t);
        if (series.times[i] - t).abs() > 1e-9 * (1.0 + t.abs()) {
            return Err(Error::MismatchedTimes {
                ensemble: *t,
                state: series.times[i],
            });
        }
        let cond = conditional_coefficients(&series.states[i], space, bases, p[3], p[4])?;
        let c = &cond.coeffs;
        out.pointer.push((p[3], p[4]));
        out.populations.push(c.iter().map(|x| x.norm_sqr()).collect());
        out.e_x1.push(conditional_energy(c, space, bases, EnergyTerm::X1));
        out.e_x2.push(conditional_energy(c, space, bases, EnergyTerm::X2));
        out.e_field.push(conditional_energy(c, space, bases, EnergyTerm::Field));
        out.e_int
            .push(interaction_energy(c, &terms.system_x1) + interaction_energy(c, &terms.system_x2));
        out.raw_norm.push(cond.raw_norm);
    }
    Ok(out)
}

/// Post-measurement verdict for one conditional series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchCheck {
    pub branch: Branch,
    /// Time at which the outcome is read off (end of the pointer window).
    pub t_check: f64,
    /// |c_100|² (Y) or |c_010|² (Z) at `t_check`.
    pub recorded_population: f64,
    /// ⟨H_x1⟩ (Y) or ⟨H_x2⟩ (Z) at `t_check` [eV].
    pub recorded_energy: f64,
    /// Largest conditional-vs-reference population gap before the window.
    pub pre_window_deviation: f64,
}

impl ConditionalSeries {
    /// Evaluate at the end of the pointer window against the unconditional
    /// populations `reference` (same record times) for the pre-window part.
    pub fn check(&self, space: &MultiIndexSpace, schedule: &MeasurementSchedule, reference: &UnconditionalSeries) -> BranchCheck {
        let (start, end) = schedule.window();
        let i_end = self.times.partition_point(|&t| t < end - 1e-9).min(self.times.len() - 1);
        let (j, energy) = match self.branch {
            Branch::Z => (space.system_flat(0, 1, 0), &self.e_x2),
            _ => (space.system_flat(1, 0, 0), &self.e_x1),
        };
        let mut dev: f64 = 0.0;
        for (i, &t) in self.times.iter().enumerate() {
            if t >= start {
                break;
            }
            let r = &reference.populations[reference.index_at(t)];
            for (a, b) in self.populations[i].iter().zip(r) {
                dev = dev.max((a - b).abs());
            }
        }
        BranchCheck {
            branch: self.branch,
            t_check: self.times[i_end],
            recorded_population: self.populations[i_end][j],
            recorded_energy: energy[i_end],
            pre_window_deviation: dev,
        }
    }

    pub fn write_csv(&self, space: &MultiIndexSpace, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "# traj_id = {}, branch = {}", self.traj_id, self.branch.name())?;
        write!(w, "t,y,z")?;
        for j in 0..space.n_system() {
            write!(w, ",{}", column_label(space, j))?;
        }
        writeln!(w, ",e_x1,e_x2,e_field,e_int,raw_norm")?;
        for i in 0..self.times.len() {
            write!(w, "{:e},{:e},{:e}", self.times[i], self.pointer[i].0, self.pointer[i].1)?;
            for p in &self.populations[i] {
                write!(w, ",{p:e}")?;
            }
            writeln!(
                w,
                ",{:e},{:e},{:e},{:e},{:e}",
                self.e_x1[i], self.e_x2[i], self.e_field[i], self.e_int[i], self.raw_norm[i]
            )?;
        }
        Ok(())
    }
}

/// First completed trajectory of the given branch.
pub fn exemplar(ens: &Ensemble, branch: Branch) -> Option<usize> {
    ens.completed().find(|t| t.branch == branch).map(|t| t.id)
}

pub const MIN_RESOLVED: usize = 100;

/// Branch counts with binomial intervals against the Born weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BornSummary {
    pub n_total: usize,
    pub n_y: usize,
    pub n_z: usize,
    pub n_neither: usize,
    pub n_both: usize,
    pub n_aborted: usize,
    /// Y / (Y + Z).
    pub y_fraction: f64,
    /// Three binomial standard errors of `y_fraction`.
    pub y_ci3: f64,
    /// |c_100|², |c_010|² at the pointer-coupling centre.
    pub born_y: f64,
    pub born_z: f64,
    pub t_meas: f64,
}

impl BornSummary {
    pub fn n_resolved(&self) -> usize {
        self.n_y + self.n_z
    }

    pub fn n_unresolved(&self) -> usize {
        self.n_neither + self.n_both
    }

    /// Born prediction for Y among resolved outcomes.
    pub fn expected_y_fraction(&self) -> f64 {
        self.born_y / (self.born_y + self.born_z)
    }
}

/// Counts the ensemble's branches; `unconditional` supplies the Born
/// weights at `t_meas`.
pub fn born_summary(ens: &Ensemble, unconditional: &UnconditionalSeries, space: &MultiIndexSpace, t_meas: f64) -> Result<BornSummary> {
    let n_y = ens.count(Branch::Y);
    let n_z = ens.count(Branch::Z);
    let resolved = n_y + n_z;
    if resolved < MIN_RESOLVED {
        return Err(Error::Insufficient(format!(
            "{resolved} resolved trajectories, need {MIN_RESOLVED}"
        )));
    }
    let p = n_y as f64 / resolved as f64;
    let i = unconditional.index_at(t_meas);
    let pops = &unconditional.populations[i];
    Ok(BornSummary {
        n_total: ens.trajectories.len(),
        n_y,
        n_z,
        n_neither: ens.count(Branch::Neither),
        n_both: ens.count(Branch::Both),
        n_aborted: ens.n_aborted(),
        y_fraction: p,
        y_ci3: 3.0 * (p * (1.0 - p) / resolved as f64).sqrt(),
        born_y: pops[space.system_flat(1, 0, 0)],
        born_z: pops[space.system_flat(0, 1, 0)],
        t_meas: unconditional.times[i],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{rabi_estimate, ScenarioConfig};
    use crate::evolution::{evolve, initial_state, InitialSpec};
    use crate::hamiltonian::{assemble, build_space};

    #[test]
    fn parabola_vertex() {
        let t: Vec<f64> = (0..200).map(|i| i as f64 * 0.7).collect();
        let p: Vec<f64> = t
            .iter()
            .map(|&x| 0.5 + 0.5 * (2.0 * std::f64::consts::PI * x / 61.3).cos())
            .collect();
        let got = detect_rabi_period(&t, &p).unwrap();
        assert!((got - 61.3).abs() < 0.01, "{got}");
        assert_eq!(detect_rabi_period(&t, &vec![1.0; 200]), None);
    }

    #[test]
    fn unmeasured_rabi_and_bookkeeping() {
        let cfg = ScenarioConfig::unmeasured();
        let space = build_space(&cfg).unwrap();
        let bases = Bases::new(&cfg);
        let terms = assemble(&cfg, &space, &bases).unwrap();
        let sched = MeasurementSchedule::new(&cfg);
        let s0 = initial_state(&space, &bases, &InitialSpec::photon(cfg.pointer_packet_width_modes)).unwrap();
        let series = evolve(&terms, &space, &s0, cfg.sim_duration, cfg.dt_coeff, cfg.output_cadence, &sched).unwrap();
        let u = unconditional_series(&series, &space, &bases, &terms, &sched);
        let p001 = u.population(&space, 0, 0, 1);
        let period = detect_rabi_period(&u.times, &p001).unwrap();
        let (_, estimate) = rabi_estimate(&cfg);
        assert!((period / estimate - 1.0).abs() < 0.02, "{period} vs {estimate}");
        assert!((u.e_field[0] - 1.5 * crate::config::HBAR * cfg.cavity_omega).abs() < 1e-12);
        assert!(u.total_energy_drift() < 1e-6);
        for p in &u.populations {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        }
        // Interaction energy equals Re⟨c|V|c⟩ through the flat lists.
        let c = &series.states[40];
        let hv = terms.apply_flat(c, 0.0);
        let free: f64 = c.iter().enumerate().map(|(i, x)| x.norm_sqr() * terms.diag_energy[i]).sum();
        let total: f64 = c.iter().zip(&hv).map(|(a, b)| (a.conj() * b).re).sum();
        assert!((total - free - u.e_int[40]).abs() < 1e-15);
        let mut buf = Vec::new();
        u.write_populations(&space, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,p_000,p_001,"));
        assert_eq!(text.lines().count(), u.times.len() + 1);
    }
}
