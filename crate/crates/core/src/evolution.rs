//! Time integration of the coefficient vector and interpolation between
//! stored snapshots.

use std::io::Write;

use num_complex::Complex64;

use crate::basis::{pointer_packet, Bases};
use crate::config::HBAR;
use crate::error::{Error, Result};
use crate::hamiltonian::{BasisIndex, HamiltonianTerms, MeasurementSchedule, MultiIndexSpace};

/// Abort threshold on |‖c‖² − ‖c₀‖²|.
pub const NORM_ABORT: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientState {
    pub t: f64,
    pub c: Vec<Complex64>,
}

impl CoefficientState {
    pub fn norm_sqr(&self) -> f64 {
        self.c.iter().map(|x| x.norm_sqr()).sum()
    }
}

/// Initial (n, m, k) ket plus the pointer packet parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialSpec {
    pub ket: (usize, usize, usize),
    pub packet_width_modes: f64,
    pub packet_center: i64,
}

impl InitialSpec {
    /// |001⟩ with a centred packet of the given width.
    pub fn photon(packet_width_modes: f64) -> Self {
        InitialSpec {
            ket: (0, 0, 1),
            packet_width_modes,
            packet_center: 0,
        }
    }

    /// Parse a ket label such as `001` or `|100>`.
    pub fn with_ket_label(mut self, label: &str) -> Result<Self> {
        let digits: Vec<u32> = label
            .trim()
            .trim_start_matches('|')
            .trim_end_matches(['>', '⟩'])
            .chars()
            .map(|ch| ch.to_digit(10))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::UnknownKet(label.to_string()))?;
        if digits.len() != 3 {
            return Err(Error::UnknownKet(label.to_string()));
        }
        self.ket = (digits[0] as usize, digits[1] as usize, digits[2] as usize);
        Ok(self)
    }
}

pub fn initial_state(space: &MultiIndexSpace, bases: &Bases, spec: &InitialSpec) -> Result<CoefficientState> {
    let (n, m, k) = spec.ket;
    let label = format!("{n}{m}{k}");
    if n >= space.n_electron || m >= space.n_electron || k >= space.n_photon {
        return Err(Error::UnknownKet(label));
    }
    let (packet, _) = pointer_packet(&bases.pointer, spec.packet_width_modes, spec.packet_center)?;
    let modes = space.n_modes();
    let j = space.system_flat(n, m, k);
    let mut c = vec![Complex64::default(); space.flat_size];
    for (li, cl) in packet.iter().enumerate() {
        for (si, cs) in packet.iter().enumerate() {
            c[j * space.block() + li * modes + si] = Complex64::new(cl * cs, 0.0);
        }
    }
    Ok(CoefficientState { t: 0.0, c })
}

/// Σ_{l,s} |c_{nmkls}|².
pub fn population(state: &CoefficientState, space: &MultiIndexSpace, n: usize, m: usize, k: usize) -> Result<f64> {
    let i0 = space.flat(&BasisIndex::system(n, m, k))?;
    let start = i0 - i0 % space.block();
    Ok(state.c[start..start + space.block()].iter().map(|x| x.norm_sqr()).sum())
}

/// Populations of every system index, ordered by `system_flat`.
pub fn system_populations(c: &[Complex64], space: &MultiIndexSpace) -> Vec<f64> {
    c.chunks(space.block()).map(|b| b.iter().map(|x| x.norm_sqr()).sum()).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSeries {
    pub times: Vec<f64>,
    pub states: Vec<Vec<Complex64>>,
}

impl CoefficientSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> CoefficientState {
        CoefficientState {
            t: self.times[i],
            c: self.states[i].clone(),
        }
    }

    pub fn last(&self) -> CoefficientState {
        self.state(self.len() - 1)
    }

    /// Index of the snapshot closest to t.
    pub fn nearest(&self, t: f64) -> usize {
        let i = self.times.partition_point(|&s| s < t);
        if i == 0 {
            0
        } else if i >= self.len() {
            self.len() - 1
        } else if (self.times[i] - t).abs() < (t - self.times[i - 1]).abs() {
            i
        } else {
            i - 1
        }
    }

    /// Every `stride`-th snapshot, always keeping the last one.
    pub fn subsample(&self, stride: usize) -> CoefficientSeries {
        let stride = stride.max(1);
        let mut idx: Vec<usize> = (0..self.len()).step_by(stride).collect();
        if idx.last() != Some(&(self.len() - 1)) {
            idx.push(self.len() - 1);
        }
        CoefficientSeries {
            times: idx.iter().map(|&i| self.times[i]).collect(),
            states: idx.iter().map(|&i| self.states[i].clone()).collect(),
        }
    }

    /// Largest |‖c(t)‖² − ‖c(0)‖²|.
    pub fn norm_drift(&self) -> f64 {
        let norm = |c: &[Complex64]| c.iter().map(|x| x.norm_sqr()).sum::<f64>();
        let n0 = norm(&self.states[0]);
        self.states.iter().map(|c| (norm(c) - n0).abs()).fold(0.0, f64::max)
    }

    /// CSV with header `t,re_c_<n><m><k>_<l>_<s>,im_c_...` over the odd sector.
    pub fn write_csv(&self, space: &MultiIndexSpace, mut w: impl Write) -> std::io::Result<()> {
        let label = |i: usize| {
            let b = space.index(i);
            format!("{}{}{}_{}_{}", b.n, b.m, b.k, b.l, b.s)
        };
        write!(w, "t")?;
        for &i in &space.odd {
            let l = label(i);
            write!(w, ",re_c_{l},im_c_{l}")?;
        }
        writeln!(w)?;
        for (t, c) in self.times.iter().zip(&self.states) {
            write!(w, "{t:e}")?;
            for &i in &space.odd {
                write!(w, ",{:e},{:e}", c[i].re, c[i].im)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

struct Rk4 {
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        let z = vec![Complex64::default(); n];
        Rk4 {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z,
        }
    }

    /// One step of dc/dt = −(i/ħ)(H(t) − e_ref)c.
    fn step(&mut self, terms: &HamiltonianTerms, sched: &MeasurementSchedule, e_ref: f64, t: f64, h: f64, c: &mut [Complex64]) {
        let f = |out: &mut [Complex64], x: &[Complex64], tt: f64| {
            terms.apply_into(x, sched.mu(tt), e_ref, out);
            for o in out.iter_mut() {
                *o = Complex64::new(o.im, -o.re) / HBAR;
            }
        };
        f(&mut self.k1, c, t);
        for i in 0..c.len() {
            self.tmp[i] = c[i] + self.k1[i] * (0.5 * h);
        }
        f(&mut self.k2, &self.tmp, t + 0.5 * h);
        for i in 0..c.len() {
            self.tmp[i] = c[i] + self.k2[i] * (0.5 * h);
        }
        f(&mut self.k3, &self.tmp, t + 0.5 * h);
        for i in 0..c.len() {
            self.tmp[i] = c[i] + self.k3[i] * h;
        }
        f(&mut self.k4, &self.tmp, t + h);
        for i in 0..c.len() {
            c[i] += (self.k1[i] + (self.k2[i] + self.k3[i]) * 2.0 + self.k4[i]) * (h / 6.0);
        }
    }
}

/// Integrate iħ dc/dt = H(t)c from `state.t` to `t_end` with classical RK4.
///
/// Internally the vector is carried in a frame rotating at a constant
/// reference energy (the centre of the diagonal spectrum), which shrinks
/// the phase velocities RK4 has to resolve; stored snapshots are the true
/// coefficients. No renormalization is applied. The step is adjusted so
/// that an integer number of steps lands exactly on `t_end`; `dt` must point
/// from `state.t` towards `t_end`. Snapshots are emitted every `cadence`
/// (rounded to whole steps) plus the final time.
pub fn evolve(
    terms: &HamiltonianTerms,
    space: &MultiIndexSpace,
    state: &CoefficientState,
    t_end: f64,
    dt: f64,
    cadence: f64,
    schedule: &MeasurementSchedule,
) -> Result<CoefficientSeries> {
    if state.c.len() != space.flat_size || terms.flat_size != space.flat_size {
        return Err(Error::DimensionMismatch {
            expected: space.flat_size,
            got: state.c.len(),
        });
    }
    let span = t_end - state.t;
    if !(dt.is_finite() && dt != 0.0 && span * dt > 0.0) {
        return Err(Error::InvalidParameter {
            key: "dt_coeff",
            reason: format!("step {dt} does not lead from t = {} to {t_end}", state.t),
        });
    }
    let n_steps = (span / dt).round().max(1.0) as usize;
    let h = span / n_steps as f64;
    let stride = ((cadence / dt).abs().round() as usize).max(1);

    let (lo, hi) = terms.diagonal_range(if schedule.enabled { schedule.mu0 } else { 0.0 });
    let e_ref = 0.5 * (lo + hi);
    let frame = |t: f64| Complex64::from_polar(1.0, e_ref * t / HBAR);

    let n0 = state.norm_sqr();
    let mut c: Vec<Complex64> = state.c.iter().map(|x| x * frame(state.t)).collect();
    let mut rk = Rk4::new(c.len());
    let mut times = vec![state.t];
    let mut states = vec![state.c.clone()];
    for step in 1..=n_steps {
        let t = state.t + (step - 1) as f64 * h;
        rk.step(terms, schedule, e_ref, t, h, &mut c);
        if step % stride == 0 || step == n_steps {
            let t_now = state.t + step as f64 * h;
            let back = frame(t_now).conj();
            let snap: Vec<Complex64> = c.iter().map(|x| x * back).collect();
            let drift = (snap.iter().map(|x| x.norm_sqr()).sum::<f64>() - n0).abs();
            if !(drift <= NORM_ABORT) {
                return Err(Error::NormDrift { t: t_now, drift });
            }
            times.push(t_now);
            states.push(snap);
        }
    }
    Ok(CoefficientSeries { times, states })
}

/// Free phases of the diagonal part of H(t).
///
/// Θ_i(t) = [E_i t + M_i ∫₀ᵗμ]/ħ for diagonal energy E_i and measurement
/// diagonal M_i; the phase factor factorizes into a system part and one
/// table per pointer, which keeps the per-time cost at O(n_system + modes).
#[derive(Clone, Debug)]
pub struct PhaseModel {
    system_energy: Vec<f64>,
    pointer_energy: Vec<f64>,
    pointer_momentum: Vec<f64>,
    excitation: Vec<f64>,
    n_electron: usize,
    n_photon: usize,
    schedule: MeasurementSchedule,
}

impl PhaseModel {
    pub fn new(space: &MultiIndexSpace, bases: &Bases, schedule: &MeasurementSchedule) -> Self {
        let ew = bases.well.energies();
        let system_energy = (0..space.n_system())
            .map(|j| {
                let (n, m, k) = space.system_index(j);
                ew[n] + ew[m] + bases.oscillator.energy(k)
            })
            .collect();
        let p = &bases.pointer;
        PhaseModel {
            system_energy,
            pointer_energy: (0..p.n_modes()).map(|i| p.energy(p.mode(i))).collect(),
            pointer_momentum: (0..p.n_modes()).map(|i| p.momentum(p.mode(i))).collect(),
            excitation: ew.iter().map(|e| e - ew[0]).collect(),
            n_electron: space.n_electron,
            n_photon: space.n_photon,
            schedule: *schedule,
        }
    }

    /// Multiply c by exp(sign·iΘ(t)) in place.
    pub fn rotate(&self, c: &mut [Complex64], t: f64, sign: f64) {
        let modes = self.pointer_energy.len();
        let big_i = self.schedule.integral(t);
        let ne = self.n_electron;
        // table[n][l] = exp(sign·i(E_l t + p_l (E_n−E_0) I)/ħ)
        let mut table = vec![Complex64::default(); ne * modes];
        for n in 0..ne {
            for l in 0..modes {
                let th = (self.pointer_energy[l] * t + self.pointer_momentum[l] * self.excitation[n] * big_i) / HBAR;
                table[n * modes + l] = Complex64::from_polar(1.0, sign * th);
            }
        }
        let block = modes * modes;
        for (j, chunk) in c.chunks_mut(block).enumerate() {
            let nm = j / self.n_photon;
            let (n, m) = (nm / ne, nm % ne);
            let sys = Complex64::from_polar(1.0, sign * self.system_energy[j] * t / HBAR);
            let ty = &table[n * modes..(n + 1) * modes];
            let tz = &table[m * modes..(m + 1) * modes];
            for (l, row) in chunk.chunks_mut(modes).enumerate() {
                let f = sys * ty[l];
                for (s, x) in row.iter_mut().enumerate() {
                    *x *= f * tz[s];
                }
            }
        }
    }
}

/// Snapshots stored in the co-rotating frame of the diagonal Hamiltonian,
/// so that linear interpolation only has to follow the slow coupled
/// dynamics; values are rotated back to the lab frame on demand.
#[derive(Clone, Debug)]
pub struct InterpolatedSeries {
    times: Vec<f64>,
    rotated: Vec<Vec<Complex64>>,
    model: PhaseModel,
}

impl InterpolatedSeries {
    pub fn new(series: &CoefficientSeries, space: &MultiIndexSpace, bases: &Bases, schedule: &MeasurementSchedule) -> Self {
        let model = PhaseModel::new(space, bases, schedule);
        let rotated = series
            .times
            .iter()
            .zip(&series.states)
            .map(|(&t, c)| {
                let mut r = c.clone();
                model.rotate(&mut r, t, 1.0);
                r
            })
            .collect();
        InterpolatedSeries {
            times: series.times.clone(),
            rotated,
            model,
        }
    }

    pub fn span(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// c(t) into `out`.
    pub fn at_into(&self, t: f64, out: &mut [Complex64]) -> Result<()> {
        let (a, b) = self.span();
        let tol = 1e-9 * (1.0 + b.abs());
        if !(t >= a - tol && t <= b + tol) {
            return Err(Error::TimeOutOfRange {
                requested: t,
                start: a,
                end: b,
            });
        }
        let i = self.times.partition_point(|&s| s <= t).clamp(1, self.times.len() - 1);
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let (c0, c1) = (&self.rotated[i - 1], &self.rotated[i]);
        for ((o, x0), x1) in out.iter_mut().zip(c0).zip(c1) {
            *o = x0 * (1.0 - w) + x1 * w;
        }
        self.model.rotate(out, t, -1.0);
        Ok(())
    }

    pub fn at(&self, t: f64) -> Result<CoefficientState> {
        let mut c = vec![Complex64::default(); self.rotated[0].len()];
        self.at_into(t, &mut c)?;
        Ok(CoefficientState { t, c })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::hamiltonian::{assemble, build_space};

    fn setup(cfg: &ScenarioConfig) -> (MultiIndexSpace, Bases, HamiltonianTerms, MeasurementSchedule, CoefficientState) {
        let space = build_space(cfg).unwrap();
        let bases = Bases::new(cfg);
        let terms = assemble(cfg, &space, &bases).unwrap();
        let sched = MeasurementSchedule::new(cfg);
        let s0 = initial_state(&space, &bases, &InitialSpec::photon(cfg.pointer_packet_width_modes)).unwrap();
        (space, bases, terms, sched, s0)
    }

    #[test]
    fn initial_state_shapes() {
        let cfg = ScenarioConfig::unmeasured();
        let (space, _, _, _, s0) = setup(&cfg);
        let i = space.flat(&BasisIndex::system(0, 0, 1)).unwrap();
        assert_eq!(s0.c[i], Complex64::new(1.0, 0.0));
        assert_eq!(s0.norm_sqr(), 1.0);
        let cfg = ScenarioConfig::default();
        let (space, _, _, _, s0) = setup(&cfg);
        assert!((s0.norm_sqr() - 1.0).abs() < 1e-14);
        assert!((population(&s0, &space, 0, 0, 1).unwrap() - 1.0).abs() < 1e-14);
        assert!(population(&s0, &space, 2, 0, 1).is_err());
        let bad = InitialSpec::photon(1.0).with_ket_label("0x1");
        assert!(matches!(bad, Err(Error::UnknownKet(_))));
        let spec = InitialSpec::photon(1.0).with_ket_label("|200>").unwrap();
        let bases = Bases::new(&cfg);
        assert!(matches!(initial_state(&space, &bases, &spec), Err(Error::UnknownKet(_))));
    }

    #[test]
    fn uncoupled_eigenstate_is_stationary() {
        let cfg = ScenarioConfig {
            coupling_alpha: 1e-300,
            ..ScenarioConfig::unmeasured()
        };
        let (space, _, terms, sched, s0) = setup(&cfg);
        let series = evolve(&terms, &space, &s0, 115.0, 0.0575, 5.75, &sched).unwrap();
        for c in &series.states {
            let st = CoefficientState { t: 0.0, c: c.clone() };
            assert!((population(&st, &space, 0, 0, 1).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn step_halving_converges() {
        let cfg = ScenarioConfig::unmeasured();
        let (space, _, terms, sched, s0) = setup(&cfg);
        let a = evolve(&terms, &space, &s0, 115.0, 0.0575, 115.0, &sched).unwrap();
        let b = evolve(&terms, &space, &s0, 115.0, 0.02875, 115.0, &sched).unwrap();
        let pa = system_populations(&a.last().c, &space);
        let pb = system_populations(&b.last().c, &space);
        for (x, y) in pa.iter().zip(&pb) {
            assert!((x - y).abs() <= 1e-6, "{x} {y}");
        }
    }

    #[test]
    fn time_reversal() {
        let cfg = ScenarioConfig {
            pointer_truncation: 2,
            ..ScenarioConfig::default()
        };
        let (space, _, terms, sched, s0) = setup(&cfg);
        let fwd = evolve(&terms, &space, &s0, 80.0, 0.0575, 80.0, &sched).unwrap();
        let back = evolve(&terms, &space, &fwd.last(), 0.0, -0.0575, 80.0, &sched).unwrap();
        let end = back.last();
        assert!(end.t.abs() < 1e-12);
        for (x, y) in end.c.iter().zip(&s0.c) {
            assert!((x - y).norm() < 1e-6);
        }
        assert!(evolve(&terms, &space, &s0, 10.0, -0.1, 1.0, &sched).is_err());
    }

    #[test]
    fn snapshots_at_cadence() {
        let cfg = ScenarioConfig::unmeasured();
        let (space, _, terms, sched, s0) = setup(&cfg);
        let s = evolve(&terms, &space, &s0, 11.5, 0.0575, 0.575, &sched).unwrap();
        assert_eq!(s.len(), 21);
        assert!((s.times[20] - 11.5).abs() < 1e-12);
        assert!(s.times.windows(2).all(|w| (w[1] - w[0] - 0.575).abs() < 1e-9));
        assert_eq!(s.subsample(4).len(), 6);
        assert_eq!(s.nearest(5.0), 9);
        let mut buf = Vec::new();
        s.write_csv(&space, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.starts_with("t,re_c_001_0_0,im_c_001_0_0,re_c_010_0_0"));
        assert_eq!(text.lines().count(), 22);
    }

    #[test]
    fn rotating_interpolation() {
        let cfg = ScenarioConfig {
            pointer_truncation: 3,
            ..ScenarioConfig::default()
        };
        let (space, bases, terms, sched, s0) = setup(&cfg);
        let fine = evolve(&terms, &space, &s0, 70.0, 0.0575, 0.0575, &sched).unwrap();
        let coarse = fine.subsample(2);
        let interp = InterpolatedSeries::new(&coarse, &space, &bases, &sched);
        // Exact at the nodes, accurate in between.
        let node = interp.at(coarse.times[10]).unwrap();
        for (x, y) in node.c.iter().zip(&coarse.states[10]) {
            assert!((x - y).norm() < 1e-13);
        }
        let mut worst = 0.0f64;
        for i in (1..fine.len() - 1).step_by(2) {
            let st = interp.at(fine.times[i]).unwrap();
            for (x, y) in st.c.iter().zip(&fine.states[i]) {
                worst = worst.max((x - y).norm());
            }
        }
        assert!(worst < 1e-4, "{worst}");
        assert!(interp.at(70.5).is_err());
    }
}
