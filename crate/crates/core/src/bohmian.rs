//! Bohmian guidance, trajectory integration and ensembles.
//!
//! Velocities are currents over density, v = J/|Φ|². The local currents
//! follow from the continuity equation of the full (untruncated)
//! Hamiltonian with a multiplicative dipole coupling:
//!
//! ```text
//! J_x1 = (ħ/m)·Im(Φ*∂x1Φ) − μ(ħ²/2m)·2Re(Φ*∂y∂x1Φ)
//! J_q  = ω·Im(Φ*∂qΦ)
//! J_y  = (ħ/m_y)·Im(Φ*∂yΦ) + μ(ħ²/2m)|∂x1Φ|² − μE₀|Φ|²
//! ```
//!
//! and symmetrically for (x2, z). In a truncated electron/photon basis the
//! dipole coupling is no longer a multiplication operator: it moves
//! probability between x-q configurations, and the local currents miss that
//! flow entirely (the x1 marginal never changes). [`GuidanceLaw::Conserving`]
//! adds the exact transport current of the truncated coupling, built from
//! antiderivatives of basis products; see
//! [`FieldEvaluator::coupling_current`].

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::basis::Bases;
use crate::config::{GuidanceLaw, ScenarioConfig, HBAR};
use crate::error::{Error, Result};
use crate::evolution::{CoefficientSeries, InterpolatedSeries};
use crate::hamiltonian::{HamiltonianTerms, MeasurementSchedule, MultiIndexSpace};
use crate::marginals::{trajectory_rng, Coordinate, KsResult, MarginalCdf};
use crate::wavefield::{check_domain, ConfigPoint, FieldEval, FieldEvaluator};

/// Relative node floor: |Φ|² below this times the running maximum along
/// the trajectory triggers step halving and regularized velocities.
pub const NODE_FLOOR: f64 = 1e-12;
pub const MAX_HALVINGS: u32 = 8;
/// Fraction of aborted trajectories that fails an ensemble.
pub const MAX_ABORT_FRACTION: f64 = 0.05;

/// Everything needed to turn a coefficient vector into a velocity field.
#[derive(Clone, Debug)]
pub struct GuidanceModel<'a> {
    pub space: &'a MultiIndexSpace,
    pub bases: &'a Bases,
    pub terms: &'a HamiltonianTerms,
    pub law: GuidanceLaw,
    m_e: f64,
    m_y: f64,
    omega: f64,
    e0: f64,
    alpha: f64,
}

impl<'a> GuidanceModel<'a> {
    pub fn new(cfg: &ScenarioConfig, space: &'a MultiIndexSpace, bases: &'a Bases, terms: &'a HamiltonianTerms) -> Self {
        GuidanceModel {
            space,
            bases,
            terms,
            law: cfg.guidance,
            m_e: cfg.electron_mass(),
            m_y: cfg.pointer_mass(),
            omega: cfg.cavity_omega,
            e0: bases.well.energy(0),
            alpha: cfg.coupling_alpha,
        }
    }

    pub fn with_law(mut self, law: GuidanceLaw) -> Self {
        self.law = law;
        self
    }

    pub fn evaluator(&self) -> FieldEvaluator<'a> {
        FieldEvaluator::new(self.space, self.bases)
    }

    /// Local currents from the field derivatives.
    pub fn local_current(&self, f: &FieldEval, mu: f64) -> [f64; 5] {
        let k = HBAR * HBAR / (2.0 * self.m_e);
        let rho = f.density();
        let conj = f.value.conj();
        [
            HBAR / self.m_e * (conj * f.d_x1).im - mu * k * 2.0 * (conj * f.d2_y_x1).re,
            HBAR / self.m_e * (conj * f.d_x2).im - mu * k * 2.0 * (conj * f.d2_z_x2).re,
            self.omega * (conj * f.d_q).im,
            HBAR / self.m_y * (conj * f.d_y).im + mu * k * f.d_x1.norm_sqr() - mu * self.e0 * rho,
            HBAR / self.m_y * (conj * f.d_z).im + mu * k * f.d_x2.norm_sqr() - mu * self.e0 * rho,
        ]
    }

    /// Field and total current at p under the model's law.
    pub fn current(&self, ev: &mut FieldEvaluator, c: &[Complex64], p: &ConfigPoint, mu: f64) -> (FieldEval, [f64; 5]) {
        let f = ev.evaluate(c, p);
        let mut j = self.local_current(&f, mu);
        if self.law == GuidanceLaw::Conserving {
            let extra = ev.coupling_current(&self.terms.system_x1, &self.terms.system_x2);
            j[0] += extra[0];
            j[1] += extra[1];
            j[2] += extra[2];
        }
        (f, j)
    }

    /// Velocity at p with density floored at `floor`; the flag reports
    /// whether the floor was active.
    pub fn velocity(&self, ev: &mut FieldEvaluator, c: &[Complex64], p: &ConfigPoint, mu: f64, floor: f64) -> Velocity {
        let (f, j) = self.current(ev, c, p, mu);
        let rho = f.density();
        let regularized = !(rho >= floor) || rho == 0.0;
        let denom = if regularized { floor.max(f64::MIN_POSITIVE) } else { rho };
        Velocity {
            v: j.map(|x| x / denom),
            rho,
            regularized,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Velocity {
    pub v: [f64; 5],
    pub rho: f64,
    pub regularized: bool,
}

/// Velocity of the state `c` at p (convenience wrapper, checks inputs).
pub fn velocity(model: &GuidanceModel, c: &[Complex64], p: &ConfigPoint, mu: f64) -> Result<[f64; 5]> {
    if c.len() != model.space.flat_size {
        return Err(Error::DimensionMismatch {
            expected: model.space.flat_size,
            got: c.len(),
        });
    }
    check_domain(model.bases, p)?;
    let mut ev = model.evaluator();
    Ok(model.velocity(&mut ev, c, p, mu, 0.0).v)
}

/// Which time derivative ∂_t|Φ|² the currents are tested against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Generator {
    /// Diagonal part from the coefficients plus the untruncated,
    /// multiplicative dipole coupling αq[(x1−L/2)+(x2−L/2)].
    Multiplicative,
    /// The truncated Hamiltonian actually integrated by `evolve`.
    Truncated,
}

/// Finite-difference steps per coordinate for the continuity check.
const FD_STEPS: [f64; 5] = [1e-3, 1e-3, 1e-3, 1e-1, 1e-1];

/// |∂_tρ + ∇·J| relative to |∂_tρ| + Σ|∂_iJ_i| at one point.
pub fn continuity_residual(model: &GuidanceModel, c: &[Complex64], p: &ConfigPoint, mu: f64, generator: Generator) -> f64 {
    let mut ev = model.evaluator();
    let f = ev.evaluate(c, p);
    let dc: Vec<Complex64> = match generator {
        Generator::Truncated => model.terms.apply_flat(c, mu),
        Generator::Multiplicative => c
            .iter()
            .enumerate()
            .map(|(i, x)| x * (model.terms.diag_energy[i] + mu * (model.terms.meas_diag_y[i] + model.terms.meas_diag_z[i])))
            .collect(),
    };
    let minus_i = Complex64::new(0.0, -1.0 / HBAR);
    let mut phi_t = ev.evaluate(&dc, p).value * minus_i;
    if generator == Generator::Multiplicative {
        let half = 0.5 * model.bases.well.length;
        let alpha_q = model.alpha * p.q;
        phi_t += minus_i * alpha_q * ((p.x1 - half) + (p.x2 - half)) * f.value;
    }
    let rho_t = 2.0 * (f.value.conj() * phi_t).re;
    let base = p.to_array();
    let mut div = 0.0;
    let mut scale = rho_t.abs();
    for i in 0..5 {
        let h = FD_STEPS[i];
        let mut at = |d: f64| {
            let mut a = base;
            a[i] += d;
            model.current(&mut ev, c, &ConfigPoint::from_array(a), mu).1[i]
        };
        let term = (at(-2.0 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2.0 * h)) / (12.0 * h);
        div += term;
        scale += term.abs();
    }
    if scale == 0.0 {
        return 0.0;
    }
    (rho_t + div).abs() / scale
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuityReport {
    pub law: GuidanceLaw,
    pub generator: Generator,
    pub residuals: Vec<f64>,
}

impl ContinuityReport {
    pub fn max(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Random interior points and a random normalized coefficient vector.
pub fn continuity_check(
    cfg: &ScenarioConfig,
    space: &MultiIndexSpace,
    bases: &Bases,
    terms: &HamiltonianTerms,
    law: GuidanceLaw,
    generator: Generator,
    n_points: usize,
    seed: u64,
) -> ContinuityReport {
    let model = GuidanceModel::new(cfg, space, bases, terms).with_law(law);
    let mut rng = trajectory_rng(seed, u64::MAX);
    let mut c: Vec<Complex64> = (0..space.flat_size)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let nrm = c.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    c.iter_mut().for_each(|x| *x /= nrm);
    let l = bases.well.length;
    let ly = bases.pointer.box_length;
    let mu0 = if cfg.measurement_enabled { cfg.meas_strength } else { 0.0 };
    let residuals = (0..n_points)
        .map(|_| {
            let p = ConfigPoint {
                x1: l * (0.05 + 0.9 * rng.random::<f64>()),
                x2: l * (0.05 + 0.9 * rng.random::<f64>()),
                q: 6.0 * rng.random::<f64>() - 3.0,
                y: ly * (1.8 * rng.random::<f64>() - 0.9),
                z: ly * (1.8 * rng.random::<f64>() - 0.9),
            };
            let mu = mu0 * rng.random::<f64>();
            continuity_residual(&model, &c, &p, mu, generator)
        })
        .collect();
    ContinuityReport { law, generator, residuals }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    /// Only the y pointer moved beyond threshold.
    Y,
    Z,
    Neither,
    /// Both pointers moved: forbidden by the anti-correlation invariant.
    Both,
}

impl Branch {
    pub fn classify(dy: f64, dz: f64, threshold: f64) -> Branch {
        match (dy.abs() > threshold, dz.abs() > threshold) {
            (true, false) => Branch::Y,
            (false, true) => Branch::Z,
            (false, false) => Branch::Neither,
            (true, true) => Branch::Both,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Branch::Y => "y",
            Branch::Z => "z",
            Branch::Neither => "neither",
            Branch::Both => "both",
        }
    }
}

/// Pointer displacement counted as a detection: half the displacement a
/// pointer acquires when its electron sits in the first excited level.
/// `None` without measurement.
pub fn branch_threshold(cfg: &ScenarioConfig, bases: &Bases) -> Option<f64> {
    if !cfg.measurement_enabled {
        return None;
    }
    let schedule = MeasurementSchedule::new(cfg);
    let d = (bases.well.energy(1) - bases.well.energy(0)) * schedule.integral(cfg.sim_duration);
    Some(0.5 * d)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub id: usize,
    /// Configurations at the ensemble record times.
    pub points: Vec<[f64; 5]>,
    pub branch: Branch,
    /// Steps on which the node floor was hit even after all halvings.
    pub node_events: u32,
    pub aborted: Option<String>,
}

impl Trajectory {
    pub fn start(&self) -> [f64; 5] {
        self.points[0]
    }

    pub fn end(&self) -> [f64; 5] {
        *self.points.last().unwrap()
    }
}

/// Lab-frame coefficients on the half-step grid, shared by all
/// trajectories so that the usual RK4 stages never interpolate.
#[derive(Clone, Debug)]
pub struct StageTable {
    t0: f64,
    half: f64,
    states: Vec<Vec<Complex64>>,
}

impl StageTable {
    pub fn new(interp: &InterpolatedSeries, t0: f64, h: f64, n_steps: usize) -> Result<Self> {
        let states = (0..=2 * n_steps)
            .into_par_iter()
            .map(|k| interp.at(t0 + 0.5 * h * k as f64).map(|s| s.c))
            .collect::<Result<Vec<_>>>()?;
        Ok(StageTable { t0, half: 0.5 * h, states })
    }

    fn lookup(&self, t: f64) -> Option<&[Complex64]> {
        let k = (t - self.t0) / self.half;
        let r = k.round();
        if (k - r).abs() < 1e-7 && r >= 0.0 && (r as usize) < self.states.len() {
            Some(&self.states[r as usize])
        } else {
            None
        }
    }
}

/// Time grid of the trajectory integrator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryGrid {
    pub t0: f64,
    pub h: f64,
    pub n_steps: usize,
    pub record_stride: usize,
}

impl TrajectoryGrid {
    pub fn new(t0: f64, t_end: f64, dt: f64, record_every: f64) -> Self {
        let n_steps = ((t_end - t0) / dt).round().max(1.0) as usize;
        let h = (t_end - t0) / n_steps as f64;
        TrajectoryGrid {
            t0,
            h,
            n_steps,
            record_stride: ((record_every / h).round() as usize).max(1),
        }
    }

    pub fn record_times(&self) -> Vec<f64> {
        let mut out: Vec<f64> = (0..=self.n_steps)
            .step_by(self.record_stride)
            .map(|k| self.t0 + k as f64 * self.h)
            .collect();
        if self.n_steps % self.record_stride != 0 {
            out.push(self.t0 + self.n_steps as f64 * self.h);
        }
        out
    }
}

/// Integrates single trajectories through a precomputed series.
pub struct Propagator<'a> {
    pub model: GuidanceModel<'a>,
    pub interp: &'a InterpolatedSeries,
    pub stages: &'a StageTable,
    pub schedule: MeasurementSchedule,
    pub grid: TrajectoryGrid,
    pub threshold: Option<f64>,
    /// Test hook: integrate with v ≡ 0.
    pub frozen: bool,
}

struct Walker<'a, 'b> {
    prop: &'b Propagator<'a>,
    ev: FieldEvaluator<'a>,
    buf: Vec<Complex64>,
    max_rho: f64,
    node_events: u32,
}

impl<'a, 'b> Walker<'a, 'b> {
    fn velocity(&mut self, t: f64, p: [f64; 5]) -> Result<Velocity> {
        let point = ConfigPoint::from_array(p);
        check_domain(self.prop.model.bases, &point)?;
        let c: &[Complex64] = match self.prop.stages.lookup(t) {
            Some(c) => c,
            None => {
                self.prop.interp.at_into(t, &mut self.buf)?;
                &self.buf
            }
        };
        let mu = self.prop.schedule.mu(t);
        let floor = NODE_FLOOR * self.max_rho;
        let v = self.prop.model.velocity(&mut self.ev, c, &point, mu, floor);
        self.max_rho = self.max_rho.max(v.rho);
        Ok(v)
    }

    /// One RK4 step, halved recursively when a stage hits the node floor
    /// or leaves the domain.
    fn step(&mut self, t: f64, h: f64, p: [f64; 5], depth: u32) -> Result<[f64; 5]> {
        if self.prop.frozen {
            return Ok(p);
        }
        let attempt = (|| -> Result<([f64; 5], bool)> {
            let add = |a: [f64; 5], k: [f64; 5], s: f64| std::array::from_fn(|i| a[i] + s * k[i]);
            let k1 = self.velocity(t, p)?;
            let k2 = self.velocity(t + 0.5 * h, add(p, k1.v, 0.5 * h))?;
            let k3 = self.velocity(t + 0.5 * h, add(p, k2.v, 0.5 * h))?;
            let k4 = self.velocity(t + h, add(p, k3.v, h))?;
            let flagged = k1.regularized || k2.regularized || k3.regularized || k4.regularized;
            let next = std::array::from_fn(|i| p[i] + h / 6.0 * (k1.v[i] + 2.0 * k2.v[i] + 2.0 * k3.v[i] + k4.v[i]));
            Ok((next, flagged))
        })();
        match attempt {
            Ok((next, false)) => Ok(next),
            Ok((next, true)) if depth >= MAX_HALVINGS => {
                self.node_events += 1;
                Ok(next)
            }
            Err(e @ Error::OutsideDomain(_)) if depth >= MAX_HALVINGS => Err(e),
            Err(Error::OutsideDomain(_)) | Ok((_, true)) => {
                let mid = self.step(t, 0.5 * h, p, depth + 1)?;
                self.step(t + 0.5 * h, 0.5 * h, mid, depth + 1)
            }
            Err(e) => Err(e),
        }
    }
}

impl<'a> Propagator<'a> {
    pub fn propagate(&self, id: usize, start: ConfigPoint) -> Trajectory {
        let mut w = Walker {
            prop: self,
            ev: self.model.evaluator(),
            buf: vec![Complex64::default(); self.model.space.flat_size],
            max_rho: 0.0,
            node_events: 0,
        };
        let g = self.grid;
        let mut p = start.to_array();
        let mut points = vec![p];
        let mut aborted = None;
        for k in 0..g.n_steps {
            let t = g.t0 + k as f64 * g.h;
            match w.step(t, g.h, p, 0) {
                Ok(next) => p = next,
                Err(e) => {
                    aborted = Some(format!("t = {t:.4} fs: {e}"));
                    break;
                }
            }
            if (k + 1) % g.record_stride == 0 || k + 1 == g.n_steps {
                points.push(p);
            }
        }
        let end = *points.last().unwrap();
        let branch = match (self.threshold, &aborted) {
            (Some(th), None) => Branch::classify(end[3] - start.y, end[4] - start.z, th),
            _ => Branch::Neither,
        };
        Trajectory {
            id,
            points,
            branch,
            node_events: w.node_events,
            aborted,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub config_hash: String,
    pub seed: u64,
    pub law: GuidanceLaw,
    pub times: Vec<f64>,
    pub threshold: Option<f64>,
    pub trajectories: Vec<Trajectory>,
}

impl Ensemble {
    pub fn n_aborted(&self) -> usize {
        self.trajectories.iter().filter(|t| t.aborted.is_some()).count()
    }

    pub fn completed(&self) -> impl Iterator<Item = &Trajectory> {
        self.trajectories.iter().filter(|t| t.aborted.is_none())
    }

    pub fn count(&self, b: Branch) -> usize {
        self.completed().filter(|t| t.branch == b).count()
    }

    pub fn node_events(&self) -> u64 {
        self.trajectories.iter().map(|t| t.node_events as u64).sum()
    }

    /// Record index for time t, if recorded.
    pub fn record_index(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| (s - t).abs() <= 1e-9 * (1.0 + t.abs()))
    }

    /// Values of one coordinate at record i over completed trajectories.
    pub fn column(&self, i: usize, coord: Coordinate) -> Vec<f64> {
        self.completed().map(|t| t.points[i][coord.slot()]).collect()
    }

    pub fn write_csv(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "traj_id,t,x1,x2,q,y,z")?;
        for tr in &self.trajectories {
            for (t, p) in self.times.iter().zip(&tr.points) {
                writeln!(w, "{},{:e},{:e},{:e},{:e},{:e},{:e}", tr.id, t, p[0], p[1], p[2], p[3], p[4])?;
            }
        }
        Ok(())
    }
}

/// Options for [`run_ensemble`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnsembleOptions {
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    /// Integrate with v ≡ 0 (test hook).
    pub frozen: bool,
}

/// Sample `n` initial points from the t = 0 state of `series` and integrate
/// them in parallel. Output is independent of the thread count.
pub fn run_ensemble(
    cfg: &ScenarioConfig,
    space: &MultiIndexSpace,
    bases: &Bases,
    terms: &HamiltonianTerms,
    series: &CoefficientSeries,
    n: usize,
    opts: EnsembleOptions,
) -> Result<Ensemble> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            key: "n_trajectories",
            reason: "must be at least 1".into(),
        });
    }
    let schedule = MeasurementSchedule::new(cfg);
    let interp = InterpolatedSeries::new(series, space, bases, &schedule);
    let (t0, t_end) = interp.span();
    let grid = TrajectoryGrid::new(t0, t_end, cfg.dt_traj, cfg.output_cadence);
    let work = || -> Result<Ensemble> {
        let stages = StageTable::new(&interp, t0, grid.h, grid.n_steps)?;
        let starts = crate::marginals::sample_initial(&series.states[0], space, bases, n, cfg.rng_seed)?;
        let prop = Propagator {
            model: GuidanceModel::new(cfg, space, bases, terms),
            interp: &interp,
            stages: &stages,
            schedule,
            grid,
            threshold: branch_threshold(cfg, bases),
            frozen: opts.frozen,
        };
        let trajectories: Vec<Trajectory> = starts.into_par_iter().enumerate().map(|(i, p)| prop.propagate(i, p)).collect();
        Ok(Ensemble {
            config_hash: cfg.hash(),
            seed: cfg.rng_seed,
            law: cfg.guidance,
            times: grid.record_times(),
            threshold: prop.threshold,
            trajectories,
        })
    };
    let ens = match opts.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| Error::Invariant(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    let aborted = ens.n_aborted();
    if aborted as f64 > MAX_ABORT_FRACTION * n as f64 {
        return Err(Error::TooManyAborts { aborted, total: n });
    }
    Ok(ens)
}

/// KS distance between the ensemble's marginal of `coord` and the analytic
/// marginal of `c` at time `t`.
pub fn equivariance_check(
    ens: &Ensemble,
    t: f64,
    c: &[Complex64],
    space: &MultiIndexSpace,
    bases: &Bases,
    coord: Coordinate,
) -> Result<KsResult> {
    let i = ens.record_index(t).ok_or(Error::MismatchedTimes {
        ensemble: ens.times.last().copied().unwrap_or(f64::NAN),
        state: t,
    })?;
    let samples = ens.column(i, coord);
    if samples.is_empty() {
        return Err(Error::Insufficient("no completed trajectories".into()));
    }
    let m = MarginalCdf::new(c, space, bases, coord);
    Ok(crate::marginals::ks_test(&samples, |x| m.cdf(x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{evolve, initial_state, InitialSpec};
    use crate::hamiltonian::{assemble, build_space};

    fn setup(cfg: &ScenarioConfig) -> (MultiIndexSpace, Bases, HamiltonianTerms) {
        let space = build_space(cfg).unwrap();
        let bases = Bases::new(cfg);
        let terms = assemble(cfg, &space, &bases).unwrap();
        (space, bases, terms)
    }

    fn small() -> ScenarioConfig {
        ScenarioConfig {
            pointer_truncation: 3,
            n_photon_levels: 3,
            ..Default::default()
        }
    }

    #[test]
    fn local_law_conserves_multiplicative_dynamics() {
        let cfg = small();
        let (space, bases, terms) = setup(&cfg);
        let r = continuity_check(&cfg, &space, &bases, &terms, GuidanceLaw::Local, Generator::Multiplicative, 30, 1);
        assert!(r.max() < 1e-5, "{}", r.max());
    }

    #[test]
    fn conserving_law_matches_truncated_dynamics() {
        let cfg = small();
        let (space, bases, terms) = setup(&cfg);
        let r = continuity_check(&cfg, &space, &bases, &terms, GuidanceLaw::Conserving, Generator::Truncated, 30, 2);
        assert!(r.max() < 1e-5, "{}", r.max());
        // The local law alone misses the coupling transport.
        let miss = continuity_check(&cfg, &space, &bases, &terms, GuidanceLaw::Local, Generator::Truncated, 30, 2);
        assert!(miss.max() > 1e-3, "{}", miss.max());
    }

    #[test]
    fn real_field_has_no_velocity() {
        let cfg = ScenarioConfig::unmeasured();
        let (space, bases, terms) = setup(&cfg);
        let model = GuidanceModel::new(&cfg, &space, &bases, &terms).with_law(GuidanceLaw::Local);
        let mut c = vec![Complex64::default(); space.flat_size];
        c[space.system_flat(0, 0, 1)] = Complex64::new(0.6, 0.0);
        c[space.system_flat(1, 0, 0)] = Complex64::new(0.8, 0.0);
        let p = ConfigPoint {
            x1: 5.0,
            x2: 7.0,
            q: 0.4,
            y: 3.0,
            z: -2.0,
        };
        assert_eq!(velocity(&model, &c, &p, 0.0).unwrap(), [0.0; 5]);
        let out = ConfigPoint { x2: -1.0, ..p };
        assert!(velocity(&model, &c, &out, 0.0).is_err());
    }

    #[test]
    fn eigenstate_without_coupling_is_stationary() {
        let cfg = ScenarioConfig {
            coupling_alpha: 0.0,
            sim_duration: 20.0,
            ..ScenarioConfig::unmeasured()
        };
        let (space, bases, terms) = setup(&cfg);
        let s0 = initial_state(&space, &bases, &InitialSpec::photon(cfg.pointer_packet_width_modes)).unwrap();
        let series = evolve(
            &terms,
            &space,
            &s0,
            cfg.sim_duration,
            cfg.dt_coeff,
            cfg.dt_traj,
            &MeasurementSchedule::off(),
        )
        .unwrap();
        let ens = run_ensemble(&cfg, &space, &bases, &terms, &series, 8, EnsembleOptions::default()).unwrap();
        for tr in &ens.trajectories {
            let (a, b) = (tr.start(), tr.end());
            for i in 0..5 {
                assert!((a[i] - b[i]).abs() < 1e-9, "{a:?} -> {b:?}");
            }
        }
    }

    #[test]
    fn branch_rules() {
        assert_eq!(Branch::classify(80.0, 3.0, 75.0), Branch::Y);
        assert_eq!(Branch::classify(-3.0, -80.0, 75.0), Branch::Z);
        assert_eq!(Branch::classify(3.0, 3.0, 75.0), Branch::Neither);
        assert_eq!(Branch::classify(80.0, 80.0, 75.0), Branch::Both);
    }

    #[test]
    fn grid_records() {
        let g = TrajectoryGrid::new(0.0, 115.0, 0.115, 0.575);
        assert_eq!(g.n_steps, 1000);
        assert_eq!(g.record_stride, 5);
        let t = g.record_times();
        assert_eq!(t.len(), 201);
        assert!((t[100] - 57.5).abs() < 1e-12);
    }

    #[test]
    fn ensemble_independent_of_threads() {
        let cfg = ScenarioConfig {
            sim_duration: 10.0,
            ..ScenarioConfig::unmeasured()
        };
        let (space, bases, terms) = setup(&cfg);
        let s0 = initial_state(&space, &bases, &InitialSpec::photon(cfg.pointer_packet_width_modes)).unwrap();
        let series = evolve(
            &terms,
            &space,
            &s0,
            cfg.sim_duration,
            cfg.dt_coeff,
            cfg.dt_traj,
            &MeasurementSchedule::off(),
        )
        .unwrap();
        let one = run_ensemble(
            &cfg,
            &space,
            &bases,
            &terms,
            &series,
            12,
            EnsembleOptions {
                threads: Some(1),
                ..Default::default()
            },
        )
        .unwrap();
        let three = run_ensemble(
            &cfg,
            &space,
            &bases,
            &terms,
            &series,
            12,
            EnsembleOptions {
                threads: Some(3),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(one, three);
    }
}
