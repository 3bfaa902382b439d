//! Pointwise evaluation of the wave function Φ(x1, x2, q, y, z) and its
//! derivatives straight from the coefficient vector, plus conditional wave
//! functions.
//!
//! Evaluation first contracts the pointer indices at (y, z) into three
//! amplitudes per system index (value, ∂_y, ∂_z), then sums those against
//! the electron and photon factors. The contraction is the only O(flat_size)
//! part.

use num_complex::Complex64;

use crate::basis::Bases;
use crate::config::HBAR;
use crate::error::{Error, Result};
use crate::hamiltonian::{Coupling, MultiIndexSpace};

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ConfigPoint {
    pub x1: f64,
    pub x2: f64,
    pub q: f64,
    pub y: f64,
    pub z: f64,
}

impl ConfigPoint {
    pub fn to_array(self) -> [f64; 5] {
        [self.x1, self.x2, self.q, self.y, self.z]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        ConfigPoint {
            x1: a[0],
            x2: a[1],
            q: a[2],
            y: a[3],
            z: a[4],
        }
    }
}

/// Coordinate names in array order.
pub const COORDINATES: [&str; 5] = ["x1", "x2", "q", "y", "z"];

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct FieldEval {
    pub value: Complex64,
    pub d_x1: Complex64,
    pub d_x2: Complex64,
    pub d_q: Complex64,
    pub d_y: Complex64,
    pub d_z: Complex64,
    pub d2_x1x1: Complex64,
    pub d2_x2x2: Complex64,
    /// ∂_y∂_{x1}Φ
    pub d2_y_x1: Complex64,
    /// ∂_z∂_{x2}Φ
    pub d2_z_x2: Complex64,
    /// ∂_y∂²_{x1}Φ
    pub d3_y_x1x1: Complex64,
    /// ∂_z∂²_{x2}Φ
    pub d3_z_x2x2: Complex64,
}

impl FieldEval {
    pub fn density(&self) -> f64 {
        self.value.norm_sqr()
    }
}

pub fn check_domain(bases: &Bases, p: &ConfigPoint) -> Result<()> {
    let l = bases.well.length;
    let ok_x = |x: f64| (0.0..=l).contains(&x);
    if !ok_x(p.x1) || !ok_x(p.x2) || !p.q.is_finite() || !bases.pointer.contains(p.y) || !bases.pointer.contains(p.z) {
        return Err(Error::OutsideDomain(format!(
            "(x1, x2, q, y, z) = ({}, {}, {}, {}, {})",
            p.x1, p.x2, p.q, p.y, p.z
        )));
    }
    Ok(())
}

/// Reusable scratch space for field evaluation.
#[derive(Clone, Debug)]
pub struct FieldEvaluator<'a> {
    space: &'a MultiIndexSpace,
    bases: &'a Bases,
    chi_y: Vec<Complex64>,
    chi_z: Vec<Complex64>,
    dchi_y: Vec<Complex64>,
    dchi_z: Vec<Complex64>,
    /// Pointer-contracted amplitudes per system index.
    pub s0: Vec<Complex64>,
    pub sy: Vec<Complex64>,
    pub sz: Vec<Complex64>,
    f1: [Vec<f64>; 3],
    f2: [Vec<f64>; 3],
    fq: [Vec<f64>; 2],
    point: ConfigPoint,
}

impl<'a> FieldEvaluator<'a> {
    pub fn new(space: &'a MultiIndexSpace, bases: &'a Bases) -> Self {
        let modes = space.n_modes();
        let ns = space.n_system();
        let ne = space.n_electron;
        let np = space.n_photon;
        let zc = vec![Complex64::default(); modes];
        let zs = vec![Complex64::default(); ns];
        FieldEvaluator {
            space,
            bases,
            chi_y: zc.clone(),
            chi_z: zc.clone(),
            dchi_y: zc.clone(),
            dchi_z: zc,
            s0: zs.clone(),
            sy: zs.clone(),
            sz: zs,
            f1: [vec![0.0; ne], vec![0.0; ne], vec![0.0; ne]],
            f2: [vec![0.0; ne], vec![0.0; ne], vec![0.0; ne]],
            fq: [vec![0.0; np], vec![0.0; np]],
            point: ConfigPoint::default(),
        }
    }

    pub fn space(&self) -> &MultiIndexSpace {
        self.space
    }

    /// Fill `s0`, `sy`, `sz` for pointer positions (y, z).
    pub fn contract(&mut self, c: &[Complex64], y: f64, z: f64) {
        let p = &self.bases.pointer;
        p.fill(y, &mut self.chi_y);
        p.fill(z, &mut self.chi_z);
        for i in 0..self.chi_y.len() {
            let ik = Complex64::new(0.0, p.wavenumber(p.mode(i)));
            self.dchi_y[i] = self.chi_y[i] * ik;
            self.dchi_z[i] = self.chi_z[i] * ik;
        }
        let modes = self.chi_y.len();
        for (j, blk) in c.chunks(modes * modes).enumerate() {
            let (mut a0, mut ay, mut az) = (Complex64::default(), Complex64::default(), Complex64::default());
            for (l, row) in blk.chunks(modes).enumerate() {
                let mut t = Complex64::default();
                let mut u = Complex64::default();
                for ((x, cz), dz) in row.iter().zip(&self.chi_z).zip(&self.dchi_z) {
                    t += x * cz;
                    u += x * dz;
                }
                a0 += self.chi_y[l] * t;
                ay += self.dchi_y[l] * t;
                az += self.chi_y[l] * u;
            }
            self.s0[j] = a0;
            self.sy[j] = ay;
            self.sz[j] = az;
        }
    }

    fn fill_factors(&mut self, p: &ConfigPoint) {
        let w = &self.bases.well;
        let [v1, d1, dd1] = &mut self.f1;
        w.fill(p.x1, v1, d1, dd1);
        let [v2, d2, dd2] = &mut self.f2;
        w.fill(p.x2, v2, d2, dd2);
        let [vq, dq] = &mut self.fq;
        self.bases.oscillator.fill(p.q, vq, dq);
        self.point = *p;
    }

    /// Φ and its derivatives at p for coefficient vector c.
    pub fn evaluate(&mut self, c: &[Complex64], p: &ConfigPoint) -> FieldEval {
        self.contract(c, p.y, p.z);
        self.fill_factors(p);
        self.combine()
    }

    /// Field of an arbitrary system-level amplitude vector at the current
    /// factors (value only).
    pub fn system_value(&self, amp: &[Complex64]) -> Complex64 {
        let mut out = Complex64::default();
        for (j, a) in amp.iter().enumerate() {
            let (n, m, k) = self.space.system_index(j);
            out += a * (self.f1[0][n] * self.f2[0][m] * self.fq[0][k]);
        }
        out
    }

    fn combine(&self) -> FieldEval {
        let mut e = FieldEval::default();
        let [v1, d1, dd1] = &self.f1;
        let [v2, d2, dd2] = &self.f2;
        let [vq, dq] = &self.fq;
        for j in 0..self.s0.len() {
            let (n, m, k) = self.space.system_index(j);
            let (a0, ay, az) = (self.s0[j], self.sy[j], self.sz[j]);
            let base = v1[n] * v2[m];
            e.value += a0 * (base * vq[k]);
            e.d_x1 += a0 * (d1[n] * v2[m] * vq[k]);
            e.d_x2 += a0 * (v1[n] * d2[m] * vq[k]);
            e.d_q += a0 * (base * dq[k]);
            e.d_y += ay * (base * vq[k]);
            e.d_z += az * (base * vq[k]);
            e.d2_x1x1 += a0 * (dd1[n] * v2[m] * vq[k]);
            e.d2_x2x2 += a0 * (v1[n] * dd2[m] * vq[k]);
            e.d2_y_x1 += ay * (d1[n] * v2[m] * vq[k]);
            e.d2_z_x2 += az * (v1[n] * d2[m] * vq[k]);
            e.d3_y_x1x1 += ay * (dd1[n] * v2[m] * vq[k]);
            e.d3_z_x2x2 += az * (v1[n] * dd2[m] * vq[k]);
        }
        e
    }

    /// Probability current carried by the truncated dipole coupling at the
    /// last evaluated point, as (x1, x2, q) components; see
    /// [`crate::bohmian`] for the construction. Uses the current
    /// contraction, so call right after [`evaluate`](Self::evaluate).
    pub fn coupling_current(&self, sys_x1: &[Coupling], sys_x2: &[Coupling]) -> [f64; 3] {
        let ns = self.s0.len();
        let mut d1 = vec![Complex64::default(); ns];
        let mut d2 = vec![Complex64::default(); ns];
        for cp in sys_x1 {
            d1[cp.row] += self.s0[cp.col] * cp.value;
        }
        for cp in sys_x2 {
            d2[cp.row] += self.s0[cp.col] * cp.value;
        }
        let (jx1, jq1) = self.electron_current(&d1, 1);
        let (jx2, jq2) = self.electron_current(&d2, 2);
        [jx1, jx2, jq1 + jq2]
    }

    /// (J_x, J_q) for the coupling of electron `e` with d = V_e·s0.
    fn electron_current(&self, d: &[Complex64], e: usize) -> (f64, f64) {
        let ne = self.space.n_electron;
        let np = self.space.n_photon;
        let w = &self.bases.well;
        let p = self.point;
        let (x_own, own, other) = if e == 1 {
            (p.x1, &self.f1[0], &self.f2[0])
        } else {
            (p.x2, &self.f2[0], &self.f1[0])
        };
        let vq = &self.fq[0];
        // Split each system index into (own level, other level, k).
        let split = |j: usize| {
            let (n, m, k) = self.space.system_index(j);
            if e == 1 {
                (n, m, k)
            } else {
                (m, n, k)
            }
        };
        // A_a = Σ_{other,k} s0 · other(x) ψ_k(q);  A'_{a,k} = Σ_other s0 · other(x).
        let mut a = vec![Complex64::default(); ne];
        let mut da = vec![Complex64::default(); ne];
        let mut ak = vec![Complex64::default(); ne * np];
        let mut dk = vec![Complex64::default(); ne * np];
        for j in 0..self.s0.len() {
            let (own_lvl, oth, k) = split(j);
            let f = other[oth];
            a[own_lvl] += self.s0[j] * (f * vq[k]);
            da[own_lvl] += d[j] * (f * vq[k]);
            ak[own_lvl * np + k] += self.s0[j] * f;
            dk[own_lvl * np + k] += d[j] * f;
        }
        let weight_cdf = w.overlap_cdf(0, 0, x_own);
        let mut sx = 0.0;
        for na in 0..ne {
            for nb in 0..ne {
                let mut g = w.overlap_cdf(na, nb, x_own);
                if na == nb {
                    g -= weight_cdf;
                }
                sx += g * (a[na].conj() * da[nb]).im;
            }
        }
        let iq = self.bases.oscillator.overlap_cdf_matrix(p.q);
        let mut sq = 0.0;
        for n in 0..ne {
            for ka in 0..np {
                for kb in 0..np {
                    sq += iq[ka * np + kb] * (ak[n * np + ka].conj() * dk[n * np + kb]).im;
                }
            }
        }
        let w0 = own[0] * own[0];
        (-2.0 / HBAR * sx, -2.0 / HBAR * w0 * sq)
    }
}

/// Φ and derivatives at p.
pub fn evaluate(state: &crate::evolution::CoefficientState, space: &MultiIndexSpace, bases: &Bases, p: &ConfigPoint) -> Result<FieldEval> {
    if state.c.len() != space.flat_size {
        return Err(Error::DimensionMismatch {
            expected: space.flat_size,
            got: state.c.len(),
        });
    }
    check_domain(bases, p)?;
    Ok(FieldEvaluator::new(space, bases).evaluate(&state.c, p))
}

/// Normalized conditional coefficients over (n, m, k) for pointer
/// positions (y, z), with the norm before normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct Conditional {
    pub coeffs: Vec<Complex64>,
    pub raw_norm: f64,
}

impl Conditional {
    pub fn population(&self, space: &MultiIndexSpace, n: usize, m: usize, k: usize) -> f64 {
        self.coeffs[space.system_flat(n, m, k)].norm_sqr()
    }
}

pub const DEGENERATE_NORM: f64 = 1e-30;

pub fn conditional_coefficients(c: &[Complex64], space: &MultiIndexSpace, bases: &Bases, y: f64, z: f64) -> Result<Conditional> {
    if !bases.pointer.contains(y) || !bases.pointer.contains(z) {
        return Err(Error::OutsideDomain(format!("pointer slice (y, z) = ({y}, {z})")));
    }
    let mut ev = FieldEvaluator::new(space, bases);
    ev.contract(c, y, z);
    let raw_norm = ev.s0.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if !(raw_norm >= DEGENERATE_NORM) {
        return Err(Error::DegenerateSlice { y, z, norm: raw_norm });
    }
    Ok(Conditional {
        coeffs: ev.s0.iter().map(|x| x / raw_norm).collect(),
        raw_norm,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnergyTerm {
    X1,
    X2,
    Field,
}

/// ⟨H_term⟩ for normalized system-level coefficients (interaction excluded).
pub fn conditional_energy(coeffs: &[Complex64], space: &MultiIndexSpace, bases: &Bases, which: EnergyTerm) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(j, a)| {
            let (n, m, k) = space.system_index(j);
            let e = match which {
                EnergyTerm::X1 => bases.well.energy(n),
                EnergyTerm::X2 => bases.well.energy(m),
                EnergyTerm::Field => bases.oscillator.energy(k),
            };
            e * a.norm_sqr()
        })
        .sum()
}

/// Re⟨c|V|c⟩ of the truncated dipole coupling on system-level coefficients.
pub fn interaction_energy(coeffs: &[Complex64], sys_couplings: &[Coupling]) -> f64 {
    sys_couplings
        .iter()
        .map(|cp| (coeffs[cp.row].conj() * coeffs[cp.col] * cp.value).re)
        .sum()
}
