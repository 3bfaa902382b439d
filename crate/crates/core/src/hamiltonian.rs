//! Truncated tensor-product Hamiltonian.
//!
//! Flat layout: the system index j = (n·N + m)·M + k selects a contiguous
//! block of `n_modes²` pointer amplitudes ordered (l, s) row-major. Every
//! coupling is the identity on the pointer block, so operator application
//! works block-wise.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::basis::{dipole_element, q_element, Bases, Q01};
use crate::config::{rabi_estimate, ScenarioConfig, HBAR};
use crate::error::{Error, Result};

pub const DEFAULT_SIZE_CAP: usize = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BasisIndex {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub l: i64,
    pub s: i64,
}

impl BasisIndex {
    pub fn system(n: usize, m: usize, k: usize) -> Self {
        BasisIndex { n, m, k, l: 0, s: 0 }
    }

    pub fn is_odd(&self) -> bool {
        (self.n + self.m + self.k) % 2 == 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiIndexSpace {
    pub n_electron: usize,
    pub n_photon: usize,
    pub pointer_truncation: usize,
    pub flat_size: usize,
    pub odd: Vec<usize>,
    pub even: Vec<usize>,
}

impl MultiIndexSpace {
    pub fn new(n_electron: usize, n_photon: usize, pointer_truncation: usize, cap: usize) -> Result<Self> {
        let modes = 2 * pointer_truncation + 1;
        let size = n_electron
            .checked_mul(n_electron)
            .and_then(|x| x.checked_mul(n_photon))
            .and_then(|x| x.checked_mul(modes))
            .and_then(|x| x.checked_mul(modes))
            .unwrap_or(usize::MAX);
        if size > cap {
            return Err(Error::SpaceTooLarge { size, cap });
        }
        let mut space = MultiIndexSpace {
            n_electron,
            n_photon,
            pointer_truncation,
            flat_size: size,
            odd: Vec::new(),
            even: Vec::new(),
        };
        for i in 0..size {
            if space.index(i).is_odd() {
                space.odd.push(i);
            } else {
                space.even.push(i);
            }
        }
        Ok(space)
    }

    /// Pointer modes per pointer, 2𝓛 + 1.
    pub fn n_modes(&self) -> usize {
        2 * self.pointer_truncation + 1
    }

    /// Pointer amplitudes per system index.
    pub fn block(&self) -> usize {
        self.n_modes() * self.n_modes()
    }

    /// Number of (n, m, k) combinations.
    pub fn n_system(&self) -> usize {
        self.n_electron * self.n_electron * self.n_photon
    }

    pub fn system_flat(&self, n: usize, m: usize, k: usize) -> usize {
        (n * self.n_electron + m) * self.n_photon + k
    }

    pub fn system_index(&self, j: usize) -> (usize, usize, usize) {
        let k = j % self.n_photon;
        let nm = j / self.n_photon;
        (nm / self.n_electron, nm % self.n_electron, k)
    }

    pub fn flat(&self, idx: &BasisIndex) -> Result<usize> {
        let t = self.pointer_truncation as i64;
        let out = |what, index: i64, limit| Error::IndexOutOfRange { what, index, limit };
        if idx.n >= self.n_electron {
            return Err(out("n", idx.n as i64, self.n_electron));
        }
        if idx.m >= self.n_electron {
            return Err(out("m", idx.m as i64, self.n_electron));
        }
        if idx.k >= self.n_photon {
            return Err(out("k", idx.k as i64, self.n_photon));
        }
        if idx.l.abs() > t {
            return Err(out("l", idx.l, self.pointer_truncation));
        }
        if idx.s.abs() > t {
            return Err(out("s", idx.s, self.pointer_truncation));
        }
        let j = self.system_flat(idx.n, idx.m, idx.k);
        let modes = self.n_modes();
        Ok(j * self.block() + (idx.l + t) as usize * modes + (idx.s + t) as usize)
    }

    pub fn index(&self, flat: usize) -> BasisIndex {
        let modes = self.n_modes();
        let t = self.pointer_truncation as i64;
        let j = flat / self.block();
        let r = flat % self.block();
        let (n, m, k) = self.system_index(j);
        BasisIndex {
            n,
            m,
            k,
            l: (r / modes) as i64 - t,
            s: (r % modes) as i64 - t,
        }
    }

    /// Σ over the even-parity sector of |c|².
    pub fn even_probability(&self, c: &[Complex64]) -> f64 {
        self.even.iter().map(|&i| c[i].norm_sqr()).sum()
    }
}

pub fn build_space(cfg: &ScenarioConfig) -> Result<MultiIndexSpace> {
    build_space_with_cap(cfg, DEFAULT_SIZE_CAP)
}

pub fn build_space_with_cap(cfg: &ScenarioConfig, cap: usize) -> Result<MultiIndexSpace> {
    MultiIndexSpace::new(cfg.n_electron_levels, cfg.n_photon_levels, cfg.effective_pointer_truncation(), cap)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coupling {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianTerms {
    pub flat_size: usize,
    /// E_n + E_m + E_k + E_l + E_s [eV].
    pub diag_energy: Vec<f64>,
    /// α⟨n|x|n'⟩⟨k|q|k'⟩ between flat indices.
    pub coupling_x1: Vec<Coupling>,
    pub coupling_x2: Vec<Coupling>,
    /// (ħπl/L_y)(E_n − E_0); multiplied by μ(t) at run time.
    pub meas_diag_y: Vec<f64>,
    pub meas_diag_z: Vec<f64>,
    /// The same couplings on system indices only, used for block-wise apply.
    pub system_x1: Vec<Coupling>,
    pub system_x2: Vec<Coupling>,
    block: usize,
}

/// System-level couplings (n, m, k) → (n', m, k') of electron 1 or 2.
pub(crate) fn system_couplings(space: &MultiIndexSpace, bases: &Bases, alpha: f64, electron: usize) -> Vec<Coupling> {
    let ne = space.n_electron;
    let np = space.n_photon;
    let l = bases.well.length;
    let mut out = Vec::new();
    for row in 0..space.n_system() {
        let (n, m, k) = space.system_index(row);
        for e2 in 0..ne {
            for k2 in 0..np {
                let (n2, m2, level, level2) = if electron == 1 { (e2, m, n, e2) } else { (n, e2, m, e2) };
                let v = alpha * dipole_element(l, level, level2) * q_element(k, k2);
                if v != 0.0 {
                    out.push(Coupling {
                        row,
                        col: space.system_flat(n2, m2, k2),
                        value: v,
                    });
                }
            }
        }
    }
    out
}

pub fn assemble(cfg: &ScenarioConfig, space: &MultiIndexSpace, bases: &Bases) -> Result<HamiltonianTerms> {
    if bases.well.n_levels != space.n_electron
        || bases.oscillator.n_levels != space.n_photon
        || bases.pointer.truncation != space.pointer_truncation
    {
        return Err(Error::DimensionMismatch {
            expected: space.flat_size,
            got: bases.well.n_levels.pow(2) * bases.oscillator.n_levels * bases.pointer.n_modes().pow(2),
        });
    }
    let ew = bases.well.energies();
    let ek = bases.oscillator.energies();
    let p = &bases.pointer;
    let size = space.flat_size;
    let mut diag = vec![0.0; size];
    let mut my = vec![0.0; size];
    let mut mz = vec![0.0; size];
    for i in 0..size {
        let b = space.index(i);
        diag[i] = ew[b.n] + ew[b.m] + ek[b.k] + p.energy(b.l) + p.energy(b.s);
        my[i] = p.momentum(b.l) * (ew[b.n] - ew[0]);
        mz[i] = p.momentum(b.s) * (ew[b.m] - ew[0]);
    }
    let system_x1 = system_couplings(space, bases, cfg.coupling_alpha, 1);
    let system_x2 = system_couplings(space, bases, cfg.coupling_alpha, 2);
    let block = space.block();
    let expand = |sys: &[Coupling]| -> Vec<Coupling> {
        let mut out = Vec::with_capacity(sys.len() * block);
        for c in sys {
            for r in 0..block {
                out.push(Coupling {
                    row: c.row * block + r,
                    col: c.col * block + r,
                    value: c.value,
                });
            }
        }
        out
    };
    Ok(HamiltonianTerms {
        flat_size: size,
        diag_energy: diag,
        coupling_x1: expand(&system_x1),
        coupling_x2: expand(&system_x2),
        meas_diag_y: my,
        meas_diag_z: mz,
        system_x1,
        system_x2,
        block,
    })
}

impl HamiltonianTerms {
    /// out = (H(μ) − e_shift)·c, block-wise.
    pub fn apply_into(&self, c: &[Complex64], mu: f64, e_shift: f64, out: &mut [Complex64]) {
        for i in 0..self.flat_size {
            let d = self.diag_energy[i] - e_shift + mu * (self.meas_diag_y[i] + self.meas_diag_z[i]);
            out[i] = c[i] * d;
        }
        let b = self.block;
        for cp in self.system_x1.iter().chain(&self.system_x2) {
            let src = &c[cp.col * b..(cp.col + 1) * b];
            let dst = &mut out[cp.row * b..(cp.row + 1) * b];
            for (o, s) in dst.iter_mut().zip(src) {
                *o += s * cp.value;
            }
        }
    }

    /// H(t)·c with μ(t) = `mu`.
    pub fn apply(&self, c: &[Complex64], mu: f64) -> Result<Vec<Complex64>> {
        if c.len() != self.flat_size {
            return Err(Error::DimensionMismatch {
                expected: self.flat_size,
                got: c.len(),
            });
        }
        if !(mu >= 0.0) {
            return Err(Error::InvalidParameter {
                key: "meas_strength",
                reason: format!("mu(t) must be non-negative, got {mu}"),
            });
        }
        let mut out = vec![Complex64::default(); self.flat_size];
        self.apply_into(c, mu, 0.0, &mut out);
        Ok(out)
    }

    /// Same as [`apply`](Self::apply) but through the flat coupling lists.
    pub fn apply_flat(&self, c: &[Complex64], mu: f64) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = (0..self.flat_size)
            .map(|i| c[i] * (self.diag_energy[i] + mu * (self.meas_diag_y[i] + self.meas_diag_z[i])))
            .collect();
        for cp in self.coupling_x1.iter().chain(&self.coupling_x2) {
            out[cp.row] += c[cp.col] * cp.value;
        }
        out
    }

    /// ⟨c|H|c⟩.
    pub fn expectation(&self, c: &[Complex64], mu: f64) -> Complex64 {
        let mut h = vec![Complex64::default(); self.flat_size];
        self.apply_into(c, mu, 0.0, &mut h);
        c.iter().zip(&h).map(|(a, b)| a.conj() * b).sum()
    }

    /// (min, max) of the diagonal including the measurement term at μ.
    pub fn diagonal_range(&self, mu: f64) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.flat_size {
            let d = self.diag_energy[i] + mu * (self.meas_diag_y[i] + self.meas_diag_z[i]);
            lo = lo.min(d);
            hi = hi.max(d);
        }
        (lo, hi)
    }

    /// Checks (i, j, v) ⟺ (j, i, v) on both coupling lists.
    pub fn couplings_hermitian(&self) -> bool {
        let check = |list: &[Coupling]| {
            let mut a: Vec<(usize, usize, u64)> = list.iter().map(|c| (c.row, c.col, c.value.to_bits())).collect();
            let mut b: Vec<(usize, usize, u64)> = list.iter().map(|c| (c.col, c.row, c.value.to_bits())).collect();
            a.sort_unstable();
            b.sort_unstable();
            a == b
        };
        check(&self.coupling_x1) && check(&self.coupling_x2) && check(&self.system_x1) && check(&self.system_x2)
    }

    /// Flip the sign of one coupling entry (and only that one); exists so
    /// oracle batteries can prove they catch a broken Hamiltonian.
    pub fn corrupt_coupling_sign(&mut self) {
        if let Some(c) = self.system_x1.first_mut() {
            c.value = -c.value;
        }
        if let Some(c) = self.coupling_x1.first_mut() {
            c.value = -c.value;
        }
    }
}

/// Dense H(μ) built entry by entry from the basis matrix elements, without
/// going through [`assemble`]. Oracle only; row-major.
pub fn dense_hamiltonian(cfg: &ScenarioConfig, space: &MultiIndexSpace, bases: &Bases, mu: f64) -> Vec<f64> {
    let n = space.flat_size;
    let mut h = vec![0.0; n * n];
    let w = &bases.well;
    let o = &bases.oscillator;
    let p = &bases.pointer;
    for i in 0..n {
        let a = space.index(i);
        for j in 0..n {
            let b = space.index(j);
            let mut v = 0.0;
            if a == b {
                v += w.energy(a.n) + w.energy(a.m) + o.energy(a.k) + p.energy(a.l) + p.energy(a.s);
                v += mu * p.momentum(a.l) * (w.energy(a.n) - w.energy(0));
                v += mu * p.momentum(a.s) * (w.energy(a.m) - w.energy(0));
            }
            if a.l == b.l && a.s == b.s {
                let qk = o.q_element(a.k, b.k).unwrap_or(0.0);
                if a.m == b.m {
                    v += cfg.coupling_alpha * w.dipole(a.n, b.n).unwrap_or(0.0) * qk;
                }
                if a.n == b.n {
                    v += cfg.coupling_alpha * w.dipole(a.m, b.m).unwrap_or(0.0) * qk;
                }
            }
            h[i * n + j] = v;
        }
    }
    h
}

/// Time profile of the pointer coupling μ(t) = μ₀ exp[−(t−t₀)²/(4σ²)].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasurementSchedule {
    pub enabled: bool,
    pub mu0: f64,
    pub t0: f64,
    pub sigma: f64,
}

impl MeasurementSchedule {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        MeasurementSchedule {
            enabled: cfg.measurement_enabled,
            mu0: cfg.meas_strength,
            t0: cfg.meas_center_time,
            sigma: cfg.meas_width,
        }
    }

    pub fn off() -> Self {
        MeasurementSchedule {
            enabled: false,
            mu0: 0.0,
            t0: 0.0,
            sigma: 1.0,
        }
    }

    pub fn mu(&self, t: f64) -> f64 {
        if !self.enabled {
            return 0.0;
        }
        let d = t - self.t0;
        self.mu0 * (-d * d / (4.0 * self.sigma * self.sigma)).exp()
    }

    /// ∫_0^t μ.
    pub fn integral(&self, t: f64) -> f64 {
        self.integral_between(0.0, t)
    }

    pub fn integral_between(&self, a: f64, b: f64) -> f64 {
        if !self.enabled {
            return 0.0;
        }
        let s = 2.0 * self.sigma;
        self.mu0 * self.sigma * PI.sqrt() * (libm::erf((b - self.t0) / s) - libm::erf((a - self.t0) / s))
    }

    /// Window [t₀ − 3σ, t₀ + 3σ] outside of which the pointers are
    /// considered decoupled.
    pub fn window(&self) -> (f64, f64) {
        (self.t0 - 3.0 * self.sigma, self.t0 + 3.0 * self.sigma)
    }
}

pub fn mu_of_t(cfg: &ScenarioConfig, t: f64) -> f64 {
    MeasurementSchedule::new(cfg).mu(t)
}

/// Sizes of the terms dropped after the gauge change of the p·A coupling.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectionReport {
    pub photon_energy: f64,
    /// α²/(ω_c² m_e) [eV].
    pub diag_shift_quadratic: f64,
    /// α²⟨0|x|1⟩²/(2ħω_c) [eV].
    pub diag_shift_dipole: f64,
    /// Ω_xx = α²⟨0|x|1⟩²/(ħ·ħω_c) [rad/fs].
    pub omega_xx: f64,
    /// τ_xx/τ_R = ħω_c⟨0|q|1⟩/(α|⟨0|x|1⟩|).
    pub tau_ratio: f64,
    /// Ω_R/Ω_xx with the collective Ω_R of [`rabi_estimate`].
    pub collective_ratio: f64,
    /// Both shifts below 10% of ħω_c and τ_xx > τ_R.
    pub negligible: bool,
}

pub fn correction_report(cfg: &ScenarioConfig, bases: &Bases) -> CorrectionReport {
    let alpha = cfg.coupling_alpha;
    let hw = HBAR * cfg.cavity_omega;
    let x01 = dipole_element(bases.well.length, 0, 1).abs();
    let me = bases.well.mass;
    let diag_shift_quadratic = alpha * alpha / (cfg.cavity_omega.powi(2) * me);
    let diag_shift_dipole = alpha * alpha * x01 * x01 / (2.0 * hw);
    let omega_xx = alpha * alpha * x01 * x01 / (HBAR * hw);
    let tau_ratio = hw * Q01 / (alpha * x01);
    let collective_ratio = rabi_estimate(cfg).0 / omega_xx;
    let negligible = diag_shift_quadratic.max(diag_shift_dipole) < 0.1 * hw && tau_ratio > 1.0;
    CorrectionReport {
        photon_energy: hw,
        diag_shift_quadratic,
        diag_shift_dipole,
        omega_xx,
        tau_ratio,
        collective_ratio,
        negligible,
    }
}
